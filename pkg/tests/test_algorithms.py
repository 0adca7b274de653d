import math
from fractions import Fraction
from math import fsum

import numpy as np
import pytest

from varelim.algorithms import (
    adapted_medelim,
    medelim,
    medelim_round_params,
    shrink_schedule,
    vmedelim,
    vmedelim_budget_upper,
    wnelim,
    wnelim_budget,
    wnelim_budget_exact,
)
from varelim.core import ProblemSpec, entropy
from varelim.harness import (
    ConstantSampler,
    GaussianSampler,
    SamplerExhaustedError,
    ScriptedSampler,
)
from varelim.instances import BanditInstance


# ---------------------------------------------------------------- wnelim


def test_wnelim_budget_two_equal_arms():
    exact = wnelim_budget_exact(0.2, 0.1, (0, 1), (1.0, 1.0))
    # omega = 0.1 * 1/2 = 0.05 per arm, so t = 200 ln 20 = 599.146...
    expected = 2.0 * 1.0 / 0.01 * math.log(20.0)
    assert exact[0] == pytest.approx(expected, rel=1e-14)
    assert wnelim_budget(0.2, 0.1, (0, 1), (1.0, 1.0)) == {0: 600, 1: 600}


def test_wnelim_budget_singleton_uses_plain_confidence():
    exact = wnelim_budget_exact(0.3, 0.2, (0,), (2.5,))
    # a single arm gets the whole confidence budget: omega = delta
    assert exact[0] == pytest.approx(8.0 * 2.5 / 0.09 * math.log(1 / 0.2), rel=1e-14)


def test_wnelim_preceiling_total_identity():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(1, 30))
        sigma2 = tuple(np.exp(rng.uniform(-3, 3, n)))
        epsilon = float(rng.uniform(0.05, 2.0))
        delta = float(rng.uniform(0.01, 0.9))
        exact = wnelim_budget_exact(epsilon, delta, tuple(range(n)), sigma2)
        total = fsum(exact.values())
        closed = (
            8.0
            * fsum(sigma2)
            / epsilon**2
            * (math.log(1.0 / delta) + entropy(sigma2))
        )
        assert total == pytest.approx(closed, rel=1e-12)


def test_wnelim_selects_largest_constant_means():
    sampler = ConstantSampler((0.5, 0.3, 0.1))
    res = wnelim(0.5, 0.2, 1, (0, 1, 2), (1.0, 1.0, 1.0), sampler)
    assert res.selected == (0,)
    assert res.total_samples == sum(res.pulls_per_arm.values())
    assert res.pulls_per_arm == wnelim_budget(0.5, 0.2, (0, 1, 2), (1.0, 1.0, 1.0))


def test_wnelim_m_equals_all_arms_still_pulls_full_budget():
    sampler = ConstantSampler((0.5, 0.3))
    res = wnelim(0.5, 0.2, 2, (0, 1), (1.0, 1.0), sampler)
    assert res.selected == (0, 1)
    assert res.total_samples == sum(
        wnelim_budget(0.5, 0.2, (0, 1), (1.0, 1.0)).values()
    )


def test_wnelim_ties_resolve_to_lowest_index():
    sampler = ConstantSampler((0.3, 0.3, 0.3, 0.3))
    res = wnelim(0.8, 0.2, 2, (0, 1, 2, 3), (1.0,) * 4, sampler)
    assert res.selected == (0, 1)


def test_wnelim_rejects_m_larger_than_arm_count():
    with pytest.raises(ValueError):
        wnelim(0.5, 0.2, 3, (0, 1), (1.0, 1.0), ConstantSampler((0.0, 0.0)))


def test_wnelim_rejects_bad_parameters_at_entry():
    with pytest.raises(ValueError):
        wnelim_budget(0.0, 0.1, (0,), (1.0,))
    with pytest.raises(ValueError):
        wnelim_budget(0.2, 1.0, (0,), (1.0,))


def test_wnelim_gaussian_two_arm_validity():
    # clearly separated two-arm instance; the guarantee allows 10% failures
    inst = BanditInstance.gaussian((0.21, -0.21), (1.0, 1.0))
    failures = 0
    trials = 2000
    for t in range(trials):
        sampler = GaussianSampler(inst, seed_base=101, trial=t)
        res = wnelim(0.2, 0.1, 1, (0, 1), inst.sigma2, sampler)
        mth_best = sorted(inst.means, reverse=True)[0]
        if inst.means[res.selected[0]] < mth_best - 0.2:
            failures += 1
    assert failures / trials <= 0.1


# ---------------------------------------------------------------- medelim


def test_medelim_round_params_schedule():
    eps1, del1 = medelim_round_params(0.4, 0.1, 1)
    assert eps1 == pytest.approx(0.1, rel=1e-15)
    assert del1 == pytest.approx(0.0125, rel=1e-15)
    # the accuracy schedule telescopes to epsilon
    total = sum(medelim_round_params(0.4, 0.1, r)[0] for r in range(1, 200))
    assert total == pytest.approx(0.4, rel=1e-9)


def test_medelim_round1_budget_example():
    # sigma2=1, eps=0.4, delta=0.1, m=1: 800 ln 80 = 3505.62 -> 3506
    res = medelim(0.4, 0.1, 2, tuple(range(5)), (1.0,) * 5, ConstantSampler((0.0,) * 5))
    assert res.rounds[0].budgets[0] == 3506
    raw = 2.0 * 1.0 / (0.05**2) * math.log(1 / 0.0125)
    assert math.ceil(raw) == 3506


def test_medelim_five_arms_one_round():
    sampler = ConstantSampler((5.0, 4.0, 3.0, 2.0, 1.0))
    res = medelim(0.4, 0.1, 2, (0, 1, 2, 3, 4), (1.0,) * 5, sampler)
    assert len(res.rounds) == 1
    assert res.selected == (0, 1)  # max(floor(5/2), 2) = 2 survivors


def test_medelim_at_most_two_m_arms_is_a_no_op():
    sampler = ConstantSampler((1.0, 2.0))
    res = medelim(0.4, 0.1, 2, (0, 1), (1.0, 1.0), sampler)
    assert res.selected == (0, 1)
    assert res.total_samples == 0
    assert res.rounds == ()
    assert sampler.pull_counts == {}


def test_medelim_survivor_size_recursion():
    n, two_m = 37, 4
    sampler = ConstantSampler(tuple(float(n - i) for i in range(n)))
    res = medelim(0.9, 0.3, two_m, tuple(range(n)), (1.0,) * n, sampler)
    sizes = [len(tr.active) for tr in res.rounds] + [len(res.selected)]
    expected = [n]
    while expected[-1] > two_m:
        expected.append(max(expected[-1] // 2, two_m))
    assert sizes == expected


def test_medelim_two_m_must_be_even_positive():
    with pytest.raises(ValueError):
        medelim(0.4, 0.1, 3, (0, 1, 2, 3), (1.0,) * 4, ConstantSampler((0.0,) * 4))
    with pytest.raises(ValueError):
        medelim(0.4, 0.1, 0, (0, 1), (1.0, 1.0), ConstantSampler((0.0, 0.0)))


def _medelim_budget(sigma2_i, epsilon, delta, m, round_index):
    eps_l, del_l = medelim_round_params(epsilon, delta, round_index)
    return math.ceil(2.0 * sigma2_i / ((eps_l / 2.0) ** 2) * math.log(m / del_l))


def test_medelim_uses_fresh_samples_each_round():
    # 9 arms, two_m=2: sizes 9 -> 4 -> 2.  Arm 0 looks best in round 1 and
    # collapses in round 2; stale round-1 means would keep it.
    epsilon, delta = 3.0, 0.5
    t1 = _medelim_budget(1.0, epsilon, delta, 1, 1)
    t2 = _medelim_budget(1.0, epsilon, delta, 1, 2)
    queues = {
        0: [10.0] * t1 + [-10.0] * t2,
        1: [5.0] * t1 + [7.0] * t2,
        2: [4.0] * t1 + [6.0] * t2,
        3: [3.0] * t1 + [5.0] * t2,
        4: [2.0] * t1,
        5: [1.0] * t1,
        6: [1.0] * t1,
        7: [1.0] * t1,
        8: [1.0] * t1,
    }
    sampler = ScriptedSampler(queues)
    res = medelim(epsilon, delta, 2, tuple(range(9)), (1.0,) * 9, sampler)
    assert [len(tr.active) for tr in res.rounds] == [9, 4]
    assert res.selected == (1, 2)
    assert res.pulls_per_arm[0] == t1 + t2


def test_medelim_exhausted_sampler_aborts():
    sampler = ScriptedSampler({i: [0.0] * 10 for i in range(5)})
    with pytest.raises(SamplerExhaustedError):
        medelim(0.4, 0.1, 2, tuple(range(5)), (1.0,) * 5, sampler)


def test_medelim_budgets_do_not_depend_on_rewards():
    # pull counts are a function of (round, arm variance) alone: across seeds
    # the surviving arms differ, but the round schedule, survivor sizes, and
    # per-arm budget values must match
    inst = BanditInstance.gaussian((0.0,) * 8, (1.0,) * 8)
    runs = []
    for seed in (1, 2):
        sampler = GaussianSampler(inst, seed_base=seed, trial=0)
        runs.append(medelim(0.8, 0.2, 2, tuple(range(8)), inst.sigma2, sampler))
    a, b = runs
    assert [len(tr.active) for tr in a.rounds] == [len(tr.active) for tr in b.rounds]
    assert [tr.epsilon_round for tr in a.rounds] == [tr.epsilon_round for tr in b.rounds]
    assert [tr.delta_round for tr in a.rounds] == [tr.delta_round for tr in b.rounds]
    for tr_a, tr_b in zip(a.rounds, b.rounds):
        assert sorted(tr_a.budgets.values()) == sorted(tr_b.budgets.values())
    # homogeneous variances: the total is identical even though the
    # surviving arms differ
    assert a.total_samples == b.total_samples


def test_scale_equivariance_power_of_two():
    # scaling rewards and epsilon by c and variances by c^2 is exact for
    # power-of-two c, so budgets, survivor sizes and selection all match
    c = 4.0
    base_values = (5.0, 4.0, 3.0, 2.0, 1.0, 0.5, 0.25, 0.1, 0.05)
    sigma2 = (1.0, 1.2, 0.9, 1.1, 1.0, 1.3, 0.8, 1.05, 0.95)
    res1 = medelim(0.9, 0.25, 2, tuple(range(9)), sigma2, ConstantSampler(base_values))
    res2 = medelim(
        0.9 * c,
        0.25,
        2,
        tuple(range(9)),
        tuple(v * c * c for v in sigma2),
        ConstantSampler(tuple(v * c for v in base_values)),
    )
    assert res1.selected == res2.selected
    assert res1.total_samples == res2.total_samples
    assert [tr.budgets for tr in res1.rounds] == [tr.budgets for tr in res2.rounds]


def test_medelim_topm_prime_condition_statistical():
    # one clearly-best arm among 10; survivor sets of size 4 must keep it
    # (the m'=1 target) with frequency at least 1 - (1/2) delta
    means = (2.0,) + (0.0,) * 9
    inst = BanditInstance.gaussian(means, (1.0,) * 10)
    delta, m = 0.2, 2
    hits = 0
    trials = 400
    for t in range(trials):
        sampler = GaussianSampler(inst, seed_base=55, trial=t)
        res = medelim(0.5, delta, 2 * m, tuple(range(10)), inst.sigma2, sampler)
        best_kept = max(inst.means[i] for i in res.selected)
        if best_kept >= max(inst.means) - 0.5:
            hits += 1
    assert hits / trials >= 1.0 - (1.0 / m) * delta


# ---------------------------------------------------------------- vmedelim


def test_vmedelim_noop_bands_match_plain_wnelim():
    sigma2 = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
    means = (0.6, 0.5, 0.4, 0.3, 0.2, 0.1)
    inst = BanditInstance.gaussian(means, sigma2)
    spec = ProblemSpec(0.4, 0.2, 1, sigma2)
    res_v = vmedelim(spec, GaussianSampler(inst, seed_base=9, trial=0))
    res_w = wnelim(0.2, 0.1, 1, tuple(range(6)), sigma2, GaussianSampler(inst, seed_base=9, trial=0))
    assert res_v.selected == res_w.selected
    assert res_v.total_samples == res_w.total_samples
    assert res_v.pulls_per_arm == res_w.pulls_per_arm
    assert all(len(s) == 1 for s in res_v.group_survivors.values())


def test_vmedelim_homogeneous_single_group_trace():
    spec = ProblemSpec(0.6, 0.2, 1, (1.0,) * 10)
    sampler = ConstantSampler(tuple(float(10 - i) for i in range(10)))
    res = vmedelim(spec, sampler)
    halving = [tr for tr in res.rounds if tr.stage.startswith("band0:")]
    assert [len(tr.active) for tr in halving] == [10, 5]
    refine = [tr for tr in res.rounds if tr.stage.startswith("refine:")]
    assert len(refine) == 1 and len(refine[0].active) == 2
    assert res.group_survivors == {0: (0, 1)}
    assert res.selected == (0,)


def test_vmedelim_total_aggregates_all_stages():
    spec = ProblemSpec(0.6, 0.2, 1, (1.0,) * 10)
    res = vmedelim(spec, ConstantSampler(tuple(float(10 - i) for i in range(10))))
    assert res.total_samples == sum(
        sum(tr.budgets.values()) for tr in res.rounds
    )
    assert res.total_samples == sum(res.pulls_per_arm.values())


def test_vmedelim_budget_upper_dominates_realized_runs():
    rng = np.random.default_rng(31)
    for _ in range(10):
        n = int(rng.integers(2, 12))
        m = int(rng.integers(1, max(2, n // 2 + 1)))
        sigma2 = tuple(np.exp(rng.uniform(-1.5, 1.5, n)))
        spec = ProblemSpec(0.5, 0.2, m, sigma2)
        upper = vmedelim_budget_upper(spec)
        inst = BanditInstance.gaussian(tuple(rng.uniform(0, 1, n)), sigma2)
        for trial in range(3):
            res = vmedelim(spec, GaussianSampler(inst, seed_base=12, trial=trial))
            assert res.total_samples <= upper


# ----------------------------------------------------- shrink schedule


def test_shrink_schedule_sorted_example():
    sched = shrink_schedule((4.0, 2.0, 1.0, 1.0), 1)
    assert sched.sizes == (4, 1)
    assert sched.stop_round == 2
    assert sched.min_ratio == Fraction(1, 4)


def test_shrink_schedule_homogeneous_halving():
    n = 13
    sched = shrink_schedule((1.0,) * n, 1)
    expected = []
    size = n
    level = 0
    while True:
        expected.append(max(n // (2**level), 1))
        if expected[-1] == 1:
            break
        level += 1
    assert list(sched.sizes) == expected


def test_shrink_schedule_n_equals_m():
    sched = shrink_schedule((3.0, 1.0), 2)
    assert sched.sizes == (2,)
    assert sched.stop_round == 1
    assert sched.min_ratio == Fraction(1)


def test_shrink_schedule_starts_at_n_and_is_nonincreasing():
    rng = np.random.default_rng(37)
    for _ in range(100):
        n = int(rng.integers(1, 40))
        m = int(rng.integers(1, n + 1))
        vals = tuple(np.exp(rng.uniform(-4, 4, n)))
        sched = shrink_schedule(vals, m)
        assert sched.sizes[0] == n
        assert sched.sizes[-1] == m
        assert all(a >= b for a, b in zip(sched.sizes, sched.sizes[1:]))
        assert Fraction(0) < sched.min_ratio <= Fraction(1)


# ----------------------------------------------------- adapted medelim


def test_adapted_no_rounds_when_n_equals_m():
    sampler = ConstantSampler((1.0, 2.0))
    res = adapted_medelim(0.4, 0.1, 2, (0, 1), (1.0, 1.0), sampler)
    assert res.selected == (0, 1)
    assert res.total_samples == 0


def test_adapted_returns_exactly_m_arms():
    sampler = ConstantSampler(tuple(float(i) for i in range(12)))
    res = adapted_medelim(0.8, 0.2, 3, tuple(range(12)), (1.0,) * 12, sampler)
    assert len(res.selected) == 3
    assert res.selected == (9, 10, 11)


def test_adapted_survivor_sizes_follow_schedule():
    sigma2 = (1.0,) * 11
    sched = shrink_schedule(sigma2, 1)
    sampler = ConstantSampler(tuple(float(11 - i) for i in range(11)))
    res = adapted_medelim(0.8, 0.2, 1, tuple(range(11)), sigma2, sampler)
    sizes = [len(tr.active) for tr in res.rounds] + [len(res.selected)]
    assert sizes == list(sched.sizes)


def test_adapted_round_confidence_uses_min_ratio():
    sigma2 = (4.0, 2.0, 1.0, 1.0)
    sched = shrink_schedule(sigma2, 1)
    sampler = ConstantSampler((4.0, 3.0, 2.0, 1.0))
    res = adapted_medelim(0.8, 0.2, 1, (0, 1, 2, 3), sigma2, sampler)
    assert len(res.rounds) == sched.stop_round - 1
    for tr in res.rounds:
        expected = float(sched.min_ratio) * 0.2 / (2.0**tr.round_index)
        assert tr.delta_round == pytest.approx(expected, rel=1e-15)


def test_adapted_requires_enough_arms():
    with pytest.raises(ValueError):
        adapted_medelim(0.4, 0.1, 3, (0, 1), (1.0, 1.0), ConstantSampler((0.0, 0.0)))


def test_adapted_hard_instance_validity():
    from varelim.harness import run_trials
    from varelim.instances import hard_instance_top, log_uniform_sigma2

    sigma2 = log_uniform_sigma2(77, 12, 0.25, 4.0)
    inst = hard_instance_top(12, 2, (0, 1), 2, 1.05 * 0.25, sigma2)
    summary = run_trials("adapted", inst, 0.25, 0.1, 2, 300, seed_base=909)
    assert summary.failure_rate <= 0.1
