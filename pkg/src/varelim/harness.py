"""Monte Carlo harness: deterministic samplers, success predicates, and
seeded trial aggregation.

Reproducibility contract: the p-th pull of arm ``a`` in trial ``t`` is a pure
function of ``(seed_base, t, a, p)``.  Rewards come from a Philox generator
seeded with ``SeedSequence(seed_base, spawn_key=(t, a))``; each pull consumes
exactly one 64-bit word, mapped to a uniform in (0, 1) via its top 53 bits
(half offset) and through the inverse normal CDF.  Batching pulls differently
therefore cannot change any value, and trials may run in any order or on any
number of threads without changing the aggregate.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import fsum
from typing import Mapping, Sequence

import numpy as np
from scipy.special import ndtri

from . import algorithms
from .core import ProblemSpec
from .instances import BanditInstance

__all__ = [
    "ALGORITHMS",
    "SamplerExhaustedError",
    "GaussianSampler",
    "ScriptedSampler",
    "ConstantSampler",
    "check_success",
    "topm_condition",
    "hoeffding_tail",
    "wilson_ci95",
    "TrialSummary",
    "run_trials",
    "CSV_HEADER",
    "summary_csv_fields",
]

ALGORITHMS = ("wnelim", "medelim", "vmedelim", "adapted")

_HALF_ULP53 = 2.0**-53


class SamplerExhaustedError(RuntimeError):
    """A scripted reward queue ran dry mid-run; the run is aborted."""


class GaussianSampler:
    """Rewards for all-gaussian instances on the fixed counter-based streams
    described in the module docstring."""

    def __init__(self, instance: BanditInstance, seed_base: int = 0, trial: int = 0):
        if any(kind != "gaussian" for kind in instance.kinds):
            raise ValueError("GaussianSampler needs an all-gaussian instance")
        self._means = instance.means
        self._stds = tuple(math.sqrt(v) for v in instance.sigma2)
        self._seed_base = int(seed_base)
        self._trial = int(trial)
        self._gens: dict[int, np.random.Philox] = {}
        self.pull_counts: dict[int, int] = {}

    def _generator(self, arm: int) -> np.random.Philox:
        gen = self._gens.get(arm)
        if gen is None:
            seq = np.random.SeedSequence(
                self._seed_base, spawn_key=(self._trial, arm)
            )
            gen = np.random.Philox(seq)
            self._gens[arm] = gen
        return gen

    def pull_many(self, arm: int, count: int) -> np.ndarray:
        if not 0 <= arm < len(self._means):
            raise ValueError(f"arm index {arm} out of range")
        if count < 0:
            raise ValueError("count must be >= 0")
        if count == 0:
            return np.empty(0, dtype=np.float64)
        raw = self._generator(arm).random_raw(count)
        uniform = ((raw >> np.uint64(11)) + 0.5) * _HALF_ULP53  # in (0, 1)
        self.pull_counts[arm] = self.pull_counts.get(arm, 0) + count
        return self._means[arm] + self._stds[arm] * ndtri(uniform)

    def pull(self, arm: int) -> float:
        return float(self.pull_many(arm, 1)[0])


class ScriptedSampler:
    """Replays queued per-arm rewards, for tests.  Raises
    :class:`SamplerExhaustedError` when an arm's queue runs dry."""

    def __init__(self, rewards: Mapping[int, Sequence[float]]):
        self._queues = {int(a): list(map(float, vals)) for a, vals in rewards.items()}
        self._cursor = {a: 0 for a in self._queues}
        self.pull_counts: dict[int, int] = {}

    def pull_many(self, arm: int, count: int) -> np.ndarray:
        if count < 0:
            raise ValueError("count must be >= 0")
        queue = self._queues.get(arm)
        if queue is None:
            raise SamplerExhaustedError(f"no scripted rewards for arm {arm}")
        start = self._cursor[arm]
        if start + count > len(queue):
            raise SamplerExhaustedError(
                f"arm {arm} has {len(queue) - start} scripted rewards left, needed {count}"
            )
        self._cursor[arm] = start + count
        self.pull_counts[arm] = self.pull_counts.get(arm, 0) + count
        return np.asarray(queue[start : start + count], dtype=np.float64)

    def pull(self, arm: int) -> float:
        return float(self.pull_many(arm, 1)[0])

    def remaining(self, arm: int) -> int:
        return len(self._queues.get(arm, ())) - self._cursor.get(arm, 0)


class ConstantSampler:
    """Always returns the arm's fixed value; never exhausts.  Useful to pin
    selections in structural tests."""

    def __init__(self, values: Sequence[float]):
        self._values = tuple(float(v) for v in values)
        self.pull_counts: dict[int, int] = {}

    def pull_many(self, arm: int, count: int) -> np.ndarray:
        if count < 0:
            raise ValueError("count must be >= 0")
        self.pull_counts[arm] = self.pull_counts.get(arm, 0) + count
        return np.full(count, self._values[arm], dtype=np.float64)

    def pull(self, arm: int) -> float:
        return self._values[arm]


def check_success(
    instance: BanditInstance, selected: Sequence[int], epsilon: float, m: int
) -> bool:
    """True when every selected arm's mean is within ``epsilon`` of the m-th
    largest mean.  Requires exactly ``m`` distinct selected arms."""
    sel = tuple(int(i) for i in selected)
    if len(set(sel)) != m or len(sel) != m:
        raise ValueError("selected must hold exactly m distinct arms")
    if not all(0 <= i < instance.n for i in sel):
        raise ValueError("selected arm index out of range")
    threshold = sorted(instance.means, reverse=True)[m - 1] - epsilon
    return min(instance.means[i] for i in sel) >= threshold


def topm_condition(
    instance: BanditInstance, selected: Sequence[int], epsilon: float, m_prime: int
) -> bool:
    """True when the m'-th best selected mean is within ``epsilon`` of the
    m'-th best overall mean.  The selected set may be larger than m'."""
    sel = tuple(int(i) for i in selected)
    if m_prime < 1 or len(set(sel)) != len(sel) or len(sel) < m_prime:
        raise ValueError("need at least m_prime distinct selected arms")
    best_sel = sorted((instance.means[i] for i in sel), reverse=True)[m_prime - 1]
    best_all = sorted(instance.means, reverse=True)[m_prime - 1]
    return best_sel >= best_all - epsilon


def hoeffding_tail(samples: int, sigma2: float, epsilon: float) -> float:
    """Upper bound ``exp(-epsilon^2 n / (2 sigma2))`` on the chance that a
    sample mean of ``n`` independent sub-Gaussian draws overshoots (or
    undershoots) its mean by ``epsilon``."""
    if samples <= 0:
        raise ValueError("samples must be positive")
    if not (sigma2 > 0.0 and math.isfinite(sigma2)):
        raise ValueError("sigma2 must be positive")
    if not (epsilon > 0.0 and math.isfinite(epsilon)):
        raise ValueError("epsilon must be positive")
    return math.exp(-(epsilon**2) * samples / (2.0 * sigma2))


_Z95 = 1.959963984540054


def wilson_ci95(failures: int, trials: int) -> tuple[float, float]:
    """95% Wilson score interval for a failure proportion."""
    if trials < 1 or not 0 <= failures <= trials:
        raise ValueError("need 0 <= failures <= trials, trials >= 1")
    p = failures / trials
    z2 = _Z95 * _Z95
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2.0 * trials)) / denom
    half = _Z95 * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denom
    # rounding must not push the interval off the point estimate
    lo = max(0.0, min(center - half, p))
    hi = min(1.0, max(center + half, p))
    return lo, hi


@dataclass(frozen=True)
class TrialSummary:
    """Aggregate of seeded trials: failure counts and rate, its 95% Wilson
    interval, and the sample-count statistics."""

    trials: int
    failures: int
    failure_rate: float
    mean_samples: float
    samples_stddev: float
    wilson_ci95: tuple[float, float]
    seed_base: int


def _run_one(
    algorithm: str,
    instance: BanditInstance,
    epsilon: float,
    delta: float,
    m: int,
    seed_base: int,
    trial: int,
) -> tuple[bool, int]:
    sampler = GaussianSampler(instance, seed_base, trial)
    arms = tuple(range(instance.n))
    if algorithm == "wnelim":
        result = algorithms.wnelim(epsilon, delta, m, arms, instance.sigma2, sampler)
    elif algorithm == "medelim":
        result = algorithms.medelim(epsilon, delta, 2 * m, arms, instance.sigma2, sampler)
    elif algorithm == "vmedelim":
        spec = ProblemSpec(epsilon, delta, m, instance.sigma2)
        result = algorithms.vmedelim(spec, sampler)
    elif algorithm == "adapted":
        result = algorithms.adapted_medelim(
            epsilon, delta, m, arms, instance.sigma2, sampler
        )
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if algorithm == "medelim":
        # the survivor set has 2m arms; success means it still carries arms
        # matching the m-th best mean up to epsilon
        ok = topm_condition(instance, result.selected, epsilon, m)
    else:
        ok = check_success(instance, result.selected, epsilon, m)
    return ok, result.total_samples


def run_trials(
    algorithm: str,
    instance: BanditInstance,
    epsilon: float,
    delta: float,
    m: int,
    trials: int,
    seed_base: int,
    threads: int = 1,
) -> TrialSummary:
    """Run seeded independent trials of one algorithm on one instance.

    Trial ``t`` draws from streams derived from ``(seed_base, t)`` only, and
    aggregation is indexed by trial, so the summary is a pure function of the
    arguments regardless of ``threads``.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 1 <= m <= instance.n:
        raise ValueError("m must satisfy 1 <= m <= n")

    def one(trial: int) -> tuple[bool, int]:
        return _run_one(algorithm, instance, epsilon, delta, m, seed_base, trial)

    if threads <= 1:
        outcomes = [one(t) for t in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, range(trials)))

    failures = sum(1 for ok, _ in outcomes if not ok)
    totals = [float(total) for _, total in outcomes]
    mean = fsum(totals) / trials
    if trials > 1:
        var = fsum((x - mean) ** 2 for x in totals) / (trials - 1)
        stddev = math.sqrt(var)
    else:
        stddev = 0.0
    return TrialSummary(
        trials=trials,
        failures=failures,
        failure_rate=failures / trials,
        mean_samples=mean,
        samples_stddev=stddev,
        wilson_ci95=wilson_ci95(failures, trials),
        seed_base=int(seed_base),
    )


CSV_HEADER = (
    "algorithm,instance_id,n,m,epsilon,delta,trials,failures,"
    "failure_rate,ci_lo,ci_hi,mean_samples,stddev,seed_base"
)


def summary_csv_fields(
    summary: TrialSummary,
    algorithm: str,
    instance_id: str,
    n: int,
    m: int,
    epsilon: float,
    delta: float,
) -> list[str]:
    """Field values matching ``CSV_HEADER``; floats use shortest round-trip
    form with a '.' separator, independent of locale."""
    return [
        algorithm,
        instance_id,
        str(int(n)),
        str(int(m)),
        repr(float(epsilon)),
        repr(float(delta)),
        str(summary.trials),
        str(summary.failures),
        repr(summary.failure_rate),
        repr(summary.wilson_ci95[0]),
        repr(summary.wilson_ci95[1]),
        repr(summary.mean_samples),
        repr(summary.samples_stddev),
        str(summary.seed_base),
    ]
