"""Core quantities for variance-aware top-m arm selection.

Defines the problem description, an entropy measure of how heterogeneous a
positive vector is, the dyadic grouping of a variance profile, and the
three-term sample budget built from the grouping.

Variance profiles come in two shapes: plain vectors (one entry per arm) and
run-length encoded profiles of ``(value, multiplicity)`` pairs for arm counts
too large to materialize.  The ``*_rle`` functions mirror the vector ones and
produce identical numbers on profiles small enough to expand.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from math import fsum
from typing import Iterable, Sequence

__all__ = [
    "SUBSET_BUDGET",
    "EnumerationBudgetError",
    "ProblemSpec",
    "VarianceGrouping",
    "ComplexityTerms",
    "entropy",
    "entropy_rle",
    "partition_groups",
    "partition_groups_rle",
    "reduced_profile_rle",
    "split_groups",
    "select_reduced",
    "group_arms",
    "complexity_terms",
    "complexity_terms_rle",
]

# Hard cap on how many subsets any exact enumeration may visit.
SUBSET_BUDGET = 10**6


class EnumerationBudgetError(RuntimeError):
    """An exact enumeration would visit more than ``SUBSET_BUDGET`` subsets."""


def entropy(values: Sequence[float]) -> float:
    """Entropy of a positive vector after normalizing it to a distribution.

    Returns ``-sum(p * ln(p))`` with ``p_i = values[i] / sum(values)``, in
    nats.  The result lies in ``[0, ln(len(values))]``; the upper end is hit
    exactly when all entries are equal, the lower end when there is a single
    entry.  Scaling every entry by the same positive factor does not change
    the result.
    """
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("entropy needs a nonempty vector")
    for v in vals:
        if not (v > 0.0 and math.isfinite(v)):
            raise ValueError("entropy needs strictly positive finite entries")
    total = fsum(vals)
    # ln(S) - sum(v ln v)/S is -sum(p ln p); fsum keeps the invariance
    # checks (scale, permutation) below 1e-12.
    ent = math.log(total) - fsum(v * math.log(v) for v in vals) / total
    return max(ent, 0.0)


def entropy_rle(profile: Iterable[tuple[float, int]]) -> float:
    """``entropy`` over a run-length encoded profile of (value, count) pairs."""
    pairs = [(float(v), int(c)) for v, c in profile]
    for v, c in pairs:
        if not (v > 0.0 and math.isfinite(v)):
            raise ValueError("entropy needs strictly positive finite values")
        if c < 0:
            raise ValueError("counts must be nonnegative")
    pairs = [(v, c) for v, c in pairs if c > 0]
    if not pairs:
        raise ValueError("entropy needs a nonempty profile")
    total = fsum(v * c for v, c in pairs)
    ent = math.log(total) - fsum(c * (v * math.log(v)) for v, c in pairs) / total
    return max(ent, 0.0)


@dataclass(frozen=True)
class ProblemSpec:
    """Inputs of one identification problem: target accuracy ``epsilon``,
    failure budget ``delta``, number of arms to return ``m``, and the known
    per-arm variance proxies ``sigma2``."""

    epsilon: float
    delta: float
    m: int
    sigma2: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigma2", tuple(float(v) for v in self.sigma2))
        if not self.sigma2:
            raise ValueError("sigma2 must hold at least one arm")
        for v in self.sigma2:
            if not (v > 0.0 and math.isfinite(v)):
                raise ValueError("all variance proxies must be positive and finite")
        if not (self.epsilon > 0.0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if not 1 <= int(self.m) <= len(self.sigma2):
            raise ValueError("m must satisfy 1 <= m <= n")
        object.__setattr__(self, "m", int(self.m))

    @property
    def n(self) -> int:
        return len(self.sigma2)

    @property
    def tight_regime(self) -> bool:
        """True when ``n > 2m`` and ``delta < 0.1``, the regime in which the
        three-term budget is a two-sided characterization.  Algorithms run
        fine outside it."""
        return self.n > 2 * self.m and self.delta < 0.1


@dataclass(frozen=True)
class VarianceGrouping:
    """Dyadic grouping of a variance profile.

    ``groups[b]`` holds the arms whose ratio ``sigma2[i] / sigma_min2`` lies
    in ``[2**b, 2**(b+1))``.  Empty bands are retained so list positions stay
    aligned with the bands.  ``g_more`` collects the bands holding more than
    ``2m`` arms, ``g_less`` the rest; ``g_reduced`` trims every crowded band
    to ``2m`` members; ``top2m`` is the ``2m`` largest-variance arms inside
    ``g_reduced`` (``None`` when ``g_reduced`` has fewer than ``2m`` arms).
    The derived fields are ``None`` until filled in by ``group_arms``.
    """

    sigma2: tuple[float, ...]
    groups: tuple[tuple[int, ...], ...]
    sigma_min2: float
    g_more: tuple[int, ...] | None = None
    g_less: tuple[int, ...] | None = None
    g_reduced: tuple[int, ...] | None = None
    top2m: tuple[int, ...] | None = None


@dataclass(frozen=True)
class ComplexityTerms:
    """Three-term sample budget: a confidence term over all arms, a term over
    the crowded (more homogeneous) arms scaling with ln(m), and a term over
    the sparse (more heterogeneous) arms scaling with the entropy of the
    reduced profile.  ``total`` is their sum; no hidden constants."""

    term_confidence: float
    term_homog: float
    term_heterog: float
    total: float
    gr_mode: str = "heuristic"


def _band_of(ratio: float) -> int:
    # frexp gives the exact binary exponent, so a ratio exactly equal to a
    # band boundary 2**b lands in band b (left-closed, right-open).
    _, exp = math.frexp(ratio)
    return exp - 1


def _check_sigma2(sigma2: Sequence[float]) -> tuple[float, ...]:
    vals = tuple(float(v) for v in sigma2)
    if not vals:
        raise ValueError("need at least one variance")
    for v in vals:
        if not (v > 0.0 and math.isfinite(v)):
            raise ValueError("all variances must be positive and finite")
    return vals


def partition_groups(sigma2: Sequence[float]) -> VarianceGrouping:
    """Partition arms into dyadic variance bands relative to the minimum.

    Arm ``i`` goes to the band ``b`` with ``2**b <= sigma2[i]/min(sigma2) <
    2**(b+1)``.  Bands with no arms are kept as empty tuples.
    """
    vals = _check_sigma2(sigma2)
    smin = min(vals)
    bands: dict[int, list[int]] = {}
    top = 0
    for i, v in enumerate(vals):
        b = _band_of(v / smin)
        bands.setdefault(b, []).append(i)
        top = max(top, b)
    groups = tuple(tuple(bands.get(b, ())) for b in range(top + 1))
    return VarianceGrouping(sigma2=vals, groups=groups, sigma_min2=smin)


def split_groups(
    grouping: VarianceGrouping, m: int
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Split arms by band crowding: bands holding more than ``2m`` arms go to
    the first tuple, the rest to the second.  Together they cover all arms."""
    if m < 1:
        raise ValueError("m must be >= 1")
    more: list[int] = []
    less: list[int] = []
    for grp in grouping.groups:
        (more if len(grp) > 2 * m else less).extend(grp)
    return tuple(sorted(more)), tuple(sorted(less))


def _largest_by_variance(arms: Iterable[int], sigma2: Sequence[float], k: int) -> list[int]:
    # ties broken toward the lowest arm index
    return sorted(arms, key=lambda i: (-sigma2[i], i))[:k]


def select_reduced(
    grouping: VarianceGrouping, m: int, mode: str = "heuristic"
) -> tuple[int, ...]:
    """Trim every crowded band to ``2m`` arms; keep small bands whole.

    ``heuristic`` keeps the ``2m`` largest-variance arms of each crowded band
    (ties to the lowest index).  ``exact`` enumerates every way of trimming
    and returns the selection whose variances have maximum entropy, breaking
    ties toward the lexicographically smallest index set; it refuses to run
    when the enumeration would exceed ``SUBSET_BUDGET`` candidates.

    Any returned selection is checked against the entropy cap ``8 ln(m)``
    (for ``m >= 2``), which holds for every admissible trim.
    """
    if mode not in ("heuristic", "exact"):
        raise ValueError("mode must be 'heuristic' or 'exact'")
    if m < 1:
        raise ValueError("m must be >= 1")
    sigma2 = grouping.sigma2
    cap = 2 * m
    small: list[int] = []
    crowded: list[tuple[int, ...]] = []
    for grp in grouping.groups:
        if len(grp) <= cap:
            small.extend(grp)
        else:
            crowded.append(grp)

    if mode == "heuristic" or not crowded:
        chosen = list(small)
        for grp in crowded:
            chosen.extend(_largest_by_variance(grp, sigma2, cap))
        selection = tuple(sorted(chosen))
    else:
        budget = 1
        for grp in crowded:
            budget *= math.comb(len(grp), cap)
            if budget > SUBSET_BUDGET:
                raise EnumerationBudgetError(
                    "exact reduced-set enumeration needs "
                    f"more than {SUBSET_BUDGET} candidates; use mode='heuristic'"
                )
        best: tuple[int, ...] | None = None
        best_ent = -1.0
        for combo in itertools.product(
            *(itertools.combinations(grp, cap) for grp in crowded)
        ):
            candidate = tuple(sorted(small + [i for part in combo for i in part]))
            ent = entropy([sigma2[i] for i in candidate])
            if ent > best_ent + 1e-15 or (
                abs(ent - best_ent) <= 1e-15 and (best is None or candidate < best)
            ):
                best, best_ent = candidate, ent
        assert best is not None
        selection = best

    if m >= 2:
        ent = entropy([sigma2[i] for i in selection])
        if ent > 8.0 * math.log(m) + 1e-9:
            raise AssertionError(
                "reduced-set entropy exceeded its 8 ln(m) cap; "
                "this indicates a grouping bug"
            )
    return selection


def group_arms(
    sigma2: Sequence[float], m: int, gr_mode: str = "heuristic"
) -> VarianceGrouping:
    """Full grouping pipeline: dyadic bands, crowded/sparse split, reduced
    selection, and the ``2m`` largest-variance arms of the reduced set."""
    grouping = partition_groups(sigma2)
    g_more, g_less = split_groups(grouping, m)
    g_reduced = select_reduced(grouping, m, mode=gr_mode)
    top2m: tuple[int, ...] | None = None
    if len(g_reduced) >= 2 * m:
        top2m = tuple(sorted(_largest_by_variance(g_reduced, grouping.sigma2, 2 * m)))
    return VarianceGrouping(
        sigma2=grouping.sigma2,
        groups=grouping.groups,
        sigma_min2=grouping.sigma_min2,
        g_more=g_more,
        g_less=g_less,
        g_reduced=g_reduced,
        top2m=top2m,
    )


def _terms_from_sums(
    epsilon: float,
    delta: float,
    m: int,
    sum_all: float,
    sum_more: float,
    sum_less: float,
    ent_reduced: float,
    gr_mode: str,
) -> ComplexityTerms:
    eps2 = epsilon * epsilon
    term_confidence = sum_all / eps2 * math.log(1.0 / delta)
    term_homog = sum_more / eps2 * math.log(m)
    term_heterog = sum_less / eps2 * ent_reduced if sum_less > 0.0 else 0.0
    total = term_confidence + term_homog + term_heterog
    return ComplexityTerms(term_confidence, term_homog, term_heterog, total, gr_mode)


def complexity_terms(spec: ProblemSpec, gr_mode: str = "heuristic") -> ComplexityTerms:
    """Evaluate the three-term budget for a problem, exactly as written:
    ``sum(sigma2)/eps^2 * ln(1/delta)`` over all arms, plus the crowded-arm
    sum times ``ln(m)``, plus the sparse-arm sum times the entropy of the
    reduced variance profile."""
    grouping = group_arms(spec.sigma2, spec.m, gr_mode=gr_mode)
    assert grouping.g_more is not None and grouping.g_less is not None
    assert grouping.g_reduced is not None
    sum_all = fsum(spec.sigma2)
    sum_more = fsum(spec.sigma2[i] for i in grouping.g_more)
    sum_less = fsum(spec.sigma2[i] for i in grouping.g_less)
    ent_reduced = entropy([spec.sigma2[i] for i in grouping.g_reduced])
    return _terms_from_sums(
        spec.epsilon, spec.delta, spec.m, sum_all, sum_more, sum_less, ent_reduced, gr_mode
    )


def _check_rle(profile: Iterable[tuple[float, int]]) -> list[tuple[float, int]]:
    pairs = [(float(v), int(c)) for v, c in profile]
    for v, c in pairs:
        if not (v > 0.0 and math.isfinite(v)):
            raise ValueError("all variances must be positive and finite")
        if c < 0:
            raise ValueError("counts must be nonnegative")
    pairs = [(v, c) for v, c in pairs if c > 0]
    if not pairs:
        raise ValueError("need at least one arm")
    return pairs


def partition_groups_rle(
    profile: Iterable[tuple[float, int]],
) -> tuple[tuple[tuple[tuple[float, int], ...], ...], float]:
    """Dyadic bands of a run-length encoded profile.

    Returns ``(bands, sigma_min2)`` where ``bands[b]`` lists the (value,
    count) pairs whose ratio to the minimum lies in ``[2**b, 2**(b+1))``;
    empty bands are retained.
    """
    pairs = _check_rle(profile)
    smin = min(v for v, _ in pairs)
    bands: dict[int, list[tuple[float, int]]] = {}
    top = 0
    for v, c in pairs:
        b = _band_of(v / smin)
        bands.setdefault(b, []).append((v, c))
        top = max(top, b)
    return tuple(tuple(bands.get(b, ())) for b in range(top + 1)), smin


def reduced_profile_rle(
    bands: Sequence[Sequence[tuple[float, int]]], m: int
) -> list[tuple[float, int]]:
    """Heuristic reduced profile: crowded bands keep their 2m largest values."""
    cap = 2 * m
    reduced: list[tuple[float, int]] = []
    for band in bands:
        size = sum(c for _, c in band)
        if size <= cap:
            reduced.extend(band)
            continue
        remaining = cap
        for v, c in sorted(band, key=lambda vc: -vc[0]):
            take = min(c, remaining)
            if take:
                reduced.append((v, take))
            remaining -= take
            if remaining == 0:
                break
    return reduced


def complexity_terms_rle(
    epsilon: float,
    delta: float,
    m: int,
    profile: Iterable[tuple[float, int]],
    gr_mode: str = "heuristic",
) -> ComplexityTerms:
    """``complexity_terms`` over a run-length encoded profile.

    Only the heuristic reduced selection is available in this form; for
    ``gr_mode='exact'`` the profile is expanded when small enough, otherwise
    an :class:`EnumerationBudgetError` is raised.
    """
    if not (epsilon > 0.0 and math.isfinite(epsilon)):
        raise ValueError("epsilon must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    pairs = _check_rle(profile)
    total_arms = sum(c for _, c in pairs)
    if not 1 <= m <= total_arms:
        raise ValueError("m must satisfy 1 <= m <= n")
    if gr_mode == "exact":
        if total_arms > 4096:
            raise EnumerationBudgetError(
                "exact reduced-set selection needs a materialized profile; "
                f"{total_arms} arms is too many to expand"
            )
        dense = [v for v, c in pairs for _ in range(c)]
        return complexity_terms(
            ProblemSpec(epsilon, delta, m, tuple(dense)), gr_mode="exact"
        )
    if gr_mode != "heuristic":
        raise ValueError("gr_mode must be 'heuristic' or 'exact'")

    bands, _ = partition_groups_rle(pairs)
    cap = 2 * m
    sum_all = fsum(v * c for v, c in pairs)
    more_sums = []
    less_sums = []
    for band in bands:
        size = sum(c for _, c in band)
        target = more_sums if size > cap else less_sums
        target.extend(v * c for v, c in band)
    sum_more = fsum(more_sums)
    sum_less = fsum(less_sums)
    ent_reduced = entropy_rle(reduced_profile_rle(bands, m))
    return _terms_from_sums(
        epsilon, delta, m, sum_all, sum_more, sum_less, ent_reduced, "heuristic"
    )
