"""Elimination algorithms for approximate top-m arm selection.

All four algorithms pull arms on fixed, data-independent schedules: every
per-round, per-arm pull count is a function of (epsilon, delta, m, the active
arm set, sigma2) alone.  Observed rewards only decide which arms survive a
cut, never how many samples are drawn for a given active set.  Each round
uses fresh samples; nothing is reused across rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from math import fsum
from typing import Mapping, Protocol, Sequence

import numpy as np

from .core import ProblemSpec, partition_groups

__all__ = [
    "Sampler",
    "RoundTrace",
    "RunResult",
    "ShrinkSchedule",
    "wnelim_budget_exact",
    "wnelim_budget",
    "wnelim",
    "medelim_round_params",
    "medelim",
    "vmedelim",
    "shrink_schedule",
    "adapted_medelim",
    "vmedelim_budget_upper",
]


class Sampler(Protocol):
    """Reward source.  ``pull_many(arm, count)`` draws ``count`` independent
    rewards from the arm and counts each one as a pull; ``pull`` is the
    single-draw convenience.  Per-arm draw streams must be independent."""

    def pull(self, arm: int) -> float: ...

    def pull_many(self, arm: int, count: int) -> np.ndarray: ...


@dataclass(frozen=True)
class RoundTrace:
    """One pulling round: which stage issued it, the active arms, the round's
    accuracy/confidence split, and the per-arm pull counts."""

    stage: str
    round_index: int
    active: tuple[int, ...]
    epsilon_round: float
    delta_round: float
    budgets: dict[int, int]


@dataclass(frozen=True)
class RunResult:
    """Outcome of one algorithm run: the selected arms, the total and per-arm
    pull counts, and the per-round trace.  ``group_survivors`` is filled by
    the grouped algorithm only (band index -> surviving arms)."""

    selected: tuple[int, ...]
    total_samples: int
    pulls_per_arm: dict[int, int]
    rounds: tuple[RoundTrace, ...]
    group_survivors: dict[int, tuple[int, ...]] | None = None


def _check_eps_delta(epsilon: float, delta: float) -> None:
    # rejected here, at entry, so the round loops never see bad parameters
    if not (epsilon > 0.0 and math.isfinite(epsilon)):
        raise ValueError("epsilon must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")


def _check_arms(arms: Sequence[int], sigma2: Sequence[float]) -> tuple[int, ...]:
    out = tuple(int(a) for a in arms)
    if len(set(out)) != len(out):
        raise ValueError("arm indices must be distinct")
    for a in out:
        if not 0 <= a < len(sigma2):
            raise ValueError(f"arm index {a} out of range")
        if not sigma2[a] > 0.0:
            raise ValueError("all variances must be positive")
    return out


def _block_mean(block) -> float:
    arr = np.asarray(block, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot average an empty reward block")
    return float(arr.mean())


def _top_by_mean(means: Mapping[int, float], k: int) -> tuple[int, ...]:
    # ties go to the lowest arm index, which keeps selection deterministic
    ranked = sorted(means, key=lambda a: (-means[a], a))
    return tuple(sorted(ranked[:k]))


def wnelim_budget_exact(
    epsilon: float, delta: float, arms: Sequence[int], sigma2: Sequence[float]
) -> dict[int, float]:
    """Pre-ceiling pull counts of the one-shot weighted scheme.

    Arm ``i`` gets ``2 sigma2[i] / (epsilon/2)^2 * ln(1/omega_i)`` pulls with
    the per-arm confidence share ``omega_i = delta * sigma2[i] / sum(sigma2)``.
    Summed over the arms this equals
    ``8 * sum(sigma2)/epsilon^2 * (ln(1/delta) + entropy(sigma2))`` exactly.
    """
    _check_eps_delta(epsilon, delta)
    arms = _check_arms(arms, sigma2)
    if not arms:
        raise ValueError("need at least one arm")
    total = fsum(sigma2[i] for i in arms)
    half_sq = (epsilon / 2.0) ** 2
    out: dict[int, float] = {}
    for i in arms:
        omega = delta * sigma2[i] / total
        out[i] = 2.0 * sigma2[i] / half_sq * math.log(1.0 / omega)
    return out


def wnelim_budget(
    epsilon: float, delta: float, arms: Sequence[int], sigma2: Sequence[float]
) -> dict[int, int]:
    """Integer pull counts: the ceiling of ``wnelim_budget_exact`` per arm.
    Rounding up keeps every concentration guarantee."""
    exact = wnelim_budget_exact(epsilon, delta, arms, sigma2)
    return {i: math.ceil(t) for i, t in exact.items()}


def wnelim(
    epsilon: float,
    delta: float,
    m: int,
    arms: Sequence[int],
    sigma2: Sequence[float],
    sampler: Sampler,
) -> RunResult:
    """One-shot weighted elimination: pull every arm its fixed budget, then
    return the ``m`` arms with the largest sample means."""
    arms = _check_arms(arms, sigma2)
    if not 1 <= m <= len(arms):
        raise ValueError("m must satisfy 1 <= m <= |arms|")
    budgets = wnelim_budget(epsilon, delta, arms, sigma2)
    means = {i: _block_mean(sampler.pull_many(i, budgets[i])) for i in arms}
    selected = _top_by_mean(means, m)
    trace = RoundTrace(
        stage="weighted",
        round_index=1,
        active=arms,
        epsilon_round=epsilon,
        delta_round=delta,
        budgets=dict(budgets),
    )
    total = sum(budgets.values())
    return RunResult(selected, total, dict(budgets), (trace,))


def medelim_round_params(epsilon: float, delta: float, round_index: int) -> tuple[float, float]:
    """Accuracy/confidence split for round ``round_index >= 1``: the geometric
    schedules ``(epsilon/3) * (3/4)**round`` and ``(delta/4) / 2**round``,
    whose (suitably weighted) sums over all rounds equal epsilon and delta."""
    if round_index < 1:
        raise ValueError("round_index starts at 1")
    eps_round = (epsilon / 3.0) * (0.75**round_index)
    delta_round = (delta / 4.0) / (2.0**round_index)
    return eps_round, delta_round


def _halving_budget(
    sigma2_i: float, eps_round: float, delta_round: float, m: int
) -> int:
    return math.ceil(2.0 * sigma2_i / ((eps_round / 2.0) ** 2) * math.log(m / delta_round))


def medelim(
    epsilon: float,
    delta: float,
    two_m: int,
    arms: Sequence[int],
    sigma2: Sequence[float],
    sampler: Sampler,
) -> RunResult:
    """Median elimination down to ``two_m`` survivors.

    While more than ``two_m`` arms remain, pull each active arm a fixed
    per-round budget, then keep the ``max(floor(size/2), two_m)`` best sample
    means.  With ``two_m = 2m`` the survivor set retains near-top arms at
    every target rank up to ``m``, which is what makes it usable as the
    per-band stage of the grouped algorithm.  Inputs with at most ``two_m``
    arms are returned untouched, with zero pulls.
    """
    _check_eps_delta(epsilon, delta)
    if two_m < 2 or two_m % 2 != 0:
        raise ValueError("two_m must be a positive even integer")
    arms = _check_arms(arms, sigma2)
    m_target = two_m // 2

    active = list(arms)
    rounds: list[RoundTrace] = []
    pulls: dict[int, int] = {}
    total = 0
    round_index = 1
    while len(active) > two_m:
        eps_round, delta_round = medelim_round_params(epsilon, delta, round_index)
        budgets = {
            i: _halving_budget(sigma2[i], eps_round, delta_round, m_target)
            for i in active
        }
        means = {i: _block_mean(sampler.pull_many(i, budgets[i])) for i in active}
        for i, t in budgets.items():
            pulls[i] = pulls.get(i, 0) + t
            total += t
        rounds.append(
            RoundTrace(
                stage="halving",
                round_index=round_index,
                active=tuple(active),
                epsilon_round=eps_round,
                delta_round=delta_round,
                budgets=budgets,
            )
        )
        keep = max(len(active) // 2, two_m)
        active = list(_top_by_mean(means, keep))
        round_index += 1
    return RunResult(tuple(sorted(active)), total, pulls, tuple(rounds))


def vmedelim(spec: ProblemSpec, sampler: Sampler) -> RunResult:
    """Variance-grouped elimination.

    Partition the arms into dyadic variance bands; run median elimination with
    half the accuracy/confidence budget inside every band (a no-op for bands
    of at most ``2m`` arms); then run the one-shot weighted stage over the
    union of survivors to pick the final ``m`` arms.
    """
    grouping = partition_groups(spec.sigma2)
    half_eps = spec.epsilon / 2.0
    half_delta = spec.delta / 2.0

    survivors: dict[int, tuple[int, ...]] = {}
    rounds: list[RoundTrace] = []
    pulls: dict[int, int] = {}
    total = 0
    pool: list[int] = []
    for band, grp in enumerate(grouping.groups):
        if not grp:
            continue
        res = medelim(half_eps, half_delta, 2 * spec.m, grp, spec.sigma2, sampler)
        survivors[band] = res.selected
        pool.extend(res.selected)
        total += res.total_samples
        for i, t in res.pulls_per_arm.items():
            pulls[i] = pulls.get(i, 0) + t
        for tr in res.rounds:
            rounds.append(
                RoundTrace(
                    stage=f"band{band}:{tr.stage}",
                    round_index=tr.round_index,
                    active=tr.active,
                    epsilon_round=tr.epsilon_round,
                    delta_round=tr.delta_round,
                    budgets=tr.budgets,
                )
            )
    pool = sorted(pool)
    if len(pool) < spec.m:
        # unreachable for valid specs: every band keeps min(size, 2m) arms
        raise AssertionError("survivor pool smaller than m")
    final = wnelim(half_eps, half_delta, spec.m, pool, spec.sigma2, sampler)
    total += final.total_samples
    for i, t in final.pulls_per_arm.items():
        pulls[i] = pulls.get(i, 0) + t
    for tr in final.rounds:
        rounds.append(
            RoundTrace(
                stage=f"refine:{tr.stage}",
                round_index=tr.round_index,
                active=tr.active,
                epsilon_round=tr.epsilon_round,
                delta_round=tr.delta_round,
                budgets=tr.budgets,
            )
        )
    return RunResult(final.selected, total, pulls, tuple(rounds), survivors)


@dataclass(frozen=True)
class ShrinkSchedule:
    """Survivor-count schedule that roughly halves the remaining variance
    mass each round.  ``sizes[0]`` is the full arm count and the last entry
    equals the target ``m``; ``min_ratio`` is the smallest consecutive
    shrink factor (1 when no shrinking happens)."""

    sizes: tuple[int, ...]
    stop_round: int
    min_ratio: Fraction


def shrink_schedule(sigma2_values: Sequence[float], m: int) -> ShrinkSchedule:
    """Compute the variance-halving schedule for a set of arms.

    Round ``r`` keeps the largest count ``h >= m`` such that the ``h``
    biggest variances sum to at most ``2**-(r-1)`` of the total, falling back
    to ``m`` when no such count exists.  The first entry always equals the
    number of arms and the sequence is nonincreasing.
    """
    vals = sorted(_check_sigma2_values(sigma2_values), reverse=True)
    n = len(vals)
    if not 1 <= m <= n:
        raise ValueError("m must satisfy 1 <= m <= n")
    prefix: list[float] = []
    acc = 0.0
    for v in vals:
        acc += v
        prefix.append(acc)
    total = prefix[-1]

    sizes: list[int] = []
    round_index = 1
    while True:
        threshold = total / (2.0 ** (round_index - 1))
        count = _count_at_most(prefix, threshold)
        h = count if count >= m else m
        sizes.append(h)
        if h == m:
            break
        round_index += 1
    stop = len(sizes)
    if stop == 1:
        min_ratio = Fraction(1)
    else:
        min_ratio = min(Fraction(sizes[j + 1], sizes[j]) for j in range(stop - 1))
    return ShrinkSchedule(tuple(sizes), stop, min_ratio)


def _check_sigma2_values(sigma2_values: Sequence[float]) -> list[float]:
    vals = [float(v) for v in sigma2_values]
    if not vals:
        raise ValueError("need at least one variance")
    for v in vals:
        if not (v > 0.0 and math.isfinite(v)):
            raise ValueError("all variances must be positive and finite")
    return vals


def _count_at_most(prefix: Sequence[float], threshold: float) -> int:
    # prefix is strictly increasing (positive entries); binary search for the
    # number of prefix sums <= threshold
    lo, hi = 0, len(prefix)
    while lo < hi:
        mid = (lo + hi) // 2
        if prefix[mid] <= threshold:
            lo = mid + 1
        else:
            hi = mid
    return lo


def adapted_medelim(
    epsilon: float,
    delta: float,
    m: int,
    arms: Sequence[int],
    sigma2: Sequence[float],
    sampler: Sampler,
) -> RunResult:
    """Median elimination with survivor counts set by the variance-halving
    schedule instead of halving the arm count.

    Runs exactly ``stop_round - 1`` rounds with the per-round confidence
    ``min_ratio * delta / 2**round`` and returns the final ``m`` survivors.
    """
    _check_eps_delta(epsilon, delta)
    arms = _check_arms(arms, sigma2)
    if not 1 <= m <= len(arms):
        raise ValueError("m must satisfy 1 <= m <= |arms|")
    sched = shrink_schedule([sigma2[i] for i in arms], m)
    ratio = float(sched.min_ratio)

    active = list(arms)
    rounds: list[RoundTrace] = []
    pulls: dict[int, int] = {}
    total = 0
    for round_index in range(1, sched.stop_round):
        eps_round = (epsilon / 3.0) * (0.75**round_index)
        delta_round = ratio * delta / (2.0**round_index)
        budgets = {
            i: _halving_budget(sigma2[i], eps_round, delta_round, m) for i in active
        }
        means = {i: _block_mean(sampler.pull_many(i, budgets[i])) for i in active}
        for i, t in budgets.items():
            pulls[i] = pulls.get(i, 0) + t
            total += t
        rounds.append(
            RoundTrace(
                stage="shrink",
                round_index=round_index,
                active=tuple(active),
                epsilon_round=eps_round,
                delta_round=delta_round,
                budgets=budgets,
            )
        )
        active = list(_top_by_mean(means, sched.sizes[round_index]))
    return RunResult(tuple(sorted(active)), total, pulls, tuple(rounds))


def vmedelim_budget_upper(spec: ProblemSpec) -> int:
    """Deterministic upper bound on the grouped algorithm's total pull count.

    Per-arm budgets scale with the arm's variance, so the total is maximized
    when the largest-variance arms survive every cut; this evaluates that
    worst case, with the same ceilings as the real run.  Any realized run,
    and hence the expected total, sits at or below this number.
    """
    grouping = partition_groups(spec.sigma2)
    half_eps = spec.epsilon / 2.0
    half_delta = spec.delta / 2.0
    two_m = 2 * spec.m

    total = 0
    pool: list[int] = []
    for grp in grouping.groups:
        if not grp:
            continue
        desc = sorted(grp, key=lambda i: (-spec.sigma2[i], i))
        size = len(desc)
        round_index = 1
        while size > two_m:
            eps_round, delta_round = medelim_round_params(half_eps, half_delta, round_index)
            total += sum(
                _halving_budget(spec.sigma2[i], eps_round, delta_round, spec.m)
                for i in desc[:size]
            )
            size = max(size // 2, two_m)
            round_index += 1
        pool.extend(desc[: min(len(desc), two_m)])
    total += sum(wnelim_budget(half_eps, half_delta, sorted(pool), spec.sigma2).values())
    return total
