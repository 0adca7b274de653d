"""Numerical evaluation of the dual lower bound on sample complexity.

Any probability assignment over candidate (m-1)-subsets is a feasible dual
point, and its objective value, scaled by ``(1-delta)/(2 epsilon^2)``, lower
bounds the worst-case expected pull count of every valid algorithm (weak
duality; the guarantee needs ``delta < 0.25`` and ``m < n/2``).  This module
evaluates that objective by exact enumeration and builds the specific
feasible assignments whose values reproduce the three budget terms.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from math import fsum
from typing import Iterable, Mapping

from .core import (
    SUBSET_BUDGET,
    ComplexityTerms,
    EnumerationBudgetError,
    ProblemSpec,
    VarianceGrouping,
    complexity_terms,
    entropy,
    group_arms,
)

__all__ = [
    "SIMPLEX_TOL",
    "DualAssignment",
    "BoundReport",
    "b_delta",
    "dual_objective",
    "sc_bound",
    "bound_report",
    "eta_uniform",
    "eta_product",
    "eta_uniform_top",
    "lower_bound_terms",
    "eta_to_json",
    "eta_from_json",
]

SIMPLEX_TOL = 1e-9


@dataclass
class DualAssignment:
    """Probability weights on (m-1)-subsets of the arms.  Sparse: subsets not
    present carry weight zero.  Weights must be nonnegative and sum to one
    within ``SIMPLEX_TOL``."""

    subset_size: int
    weights: dict[frozenset[int], float]

    def __post_init__(self) -> None:
        if self.subset_size < 0:
            raise ValueError("subset_size must be >= 0")
        clean: dict[frozenset[int], float] = {}
        for fs, w in self.weights.items():
            fs = frozenset(int(i) for i in fs)
            w = float(w)
            if len(fs) != self.subset_size:
                raise ValueError("all supported subsets must have the declared size")
            if w < 0.0 or not math.isfinite(w):
                raise ValueError("weights must be nonnegative and finite")
            if w > 0.0:
                clean[fs] = clean.get(fs, 0.0) + w
        total = fsum(clean.values())
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"weights must sum to 1 within {SIMPLEX_TOL}; got {total!r}")
        self.weights = clean

    def weight(self, subset: Iterable[int]) -> float:
        return self.weights.get(frozenset(subset), 0.0)


@dataclass(frozen=True)
class BoundReport:
    """One dual evaluation: the per-arm divergence scales ``theta``, the
    inflated failure level ``delta_prime = delta / b_delta(delta)``, the dual
    objective, and the resulting sample-count lower bound."""

    theta: tuple[float, ...]
    delta_prime: float
    objective_value: float
    sc_bound: float


def b_delta(delta: float) -> float:
    """The constant ``exp(-entropy(delta, 1-delta) / (1-delta))`` from the
    two-point change-of-measure inequality.  Strictly decreasing on the
    supported range ``0 < delta < 0.5``, with values in (0, 1)."""
    if not 0.0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 0.5)")
    ent2 = -(delta * math.log(delta) + (1.0 - delta) * math.log(1.0 - delta))
    return math.exp(-ent2 / (1.0 - delta))


def _positive_entropy(weights: Iterable[float]) -> float:
    # zero entries follow the x ln x -> 0 convention and contribute nothing
    positive = [w for w in weights if w > 0.0]
    if len(positive) <= 1:
        return 0.0
    return entropy(positive)


def dual_objective(
    eta: DualAssignment, spec: ProblemSpec, include_confidence: bool = True
) -> float:
    """Exact dual objective of a feasible assignment.

    Sums, over every m-subset M of the arms, the weight mass
    ``sum_{l in M} eta(M - {l}) * sigma2[l]`` times
    ``ln(b_delta(delta)/delta) + entropy(those per-arm masses)``; with
    ``include_confidence=False`` the log term is dropped, leaving the pure
    entropy objective.  Enumeration refuses to run past ``SUBSET_BUDGET``
    subsets.
    """
    if eta.subset_size != spec.m - 1:
        raise ValueError("assignment subset size must equal m - 1")
    if math.comb(spec.n, spec.m) > SUBSET_BUDGET:
        raise EnumerationBudgetError(
            f"enumerating C({spec.n}, {spec.m}) m-subsets exceeds {SUBSET_BUDGET}; "
            "evaluate the closed-form term expressions instead"
        )
    confidence = math.log(b_delta(spec.delta) / spec.delta) if include_confidence else 0.0
    sigma2 = spec.sigma2
    contributions: list[float] = []
    for subset in itertools.combinations(range(spec.n), spec.m):
        fs = frozenset(subset)
        masses = [eta.weight(fs - {l}) * sigma2[l] for l in subset]
        mass = fsum(masses)
        if mass <= 0.0:
            continue
        contributions.append(mass * (confidence + _positive_entropy(masses)))
    return fsum(contributions)


def sc_bound(eta: DualAssignment, spec: ProblemSpec) -> float:
    """Sample-count lower bound ``(1-delta)/(2 epsilon^2)`` times the dual
    objective.  Valid for any feasible assignment by weak duality (regime:
    ``delta < 0.25`` and ``m < n/2``)."""
    value = dual_objective(eta, spec, include_confidence=True)
    return (1.0 - spec.delta) / (2.0 * spec.epsilon**2) * value


def bound_report(eta: DualAssignment, spec: ProblemSpec) -> BoundReport:
    objective = dual_objective(eta, spec, include_confidence=True)
    bound = (1.0 - spec.delta) / (2.0 * spec.epsilon**2) * objective
    theta = tuple(
        (1.0 - spec.delta) * v / (2.0 * spec.epsilon**2) for v in spec.sigma2
    )
    return BoundReport(theta, spec.delta / b_delta(spec.delta), objective, bound)


def eta_uniform(spec: ProblemSpec) -> DualAssignment:
    """Uniform weights over every (m-1)-subset of the arms."""
    count = math.comb(spec.n, spec.m - 1)
    if count > SUBSET_BUDGET:
        raise EnumerationBudgetError(
            f"uniform assignment needs {count} subsets, over the {SUBSET_BUDGET} cap"
        )
    w = 1.0 / count
    weights = {
        frozenset(fs): w for fs in itertools.combinations(range(spec.n), spec.m - 1)
    }
    return DualAssignment(spec.m - 1, weights)


def eta_product(
    spec: ProblemSpec, grouping: VarianceGrouping | None = None
) -> DualAssignment | None:
    """Product-weighted assignment supported on the crowded arms.

    Each (m-1)-subset F of the crowded arms gets weight proportional to the
    product of its variances; subsets touching any sparse arm get zero.  For
    every m-subset M of crowded arms the induced per-arm masses are then all
    equal (each is the product over M), so their entropy is exactly ``ln m``.
    Returns ``None`` when fewer than ``m`` crowded arms exist.
    """
    if grouping is None:
        grouping = group_arms(spec.sigma2, spec.m)
    assert grouping.g_more is not None
    support = grouping.g_more
    if len(support) < spec.m:
        return None
    count = math.comb(len(support), spec.m - 1)
    if count > SUBSET_BUDGET:
        raise EnumerationBudgetError(
            f"product assignment needs {count} subsets, over the {SUBSET_BUDGET} cap"
        )
    raw: dict[frozenset[int], float] = {}
    for fs in itertools.combinations(support, spec.m - 1):
        raw[frozenset(fs)] = math.prod(spec.sigma2[i] for i in fs)
    norm = fsum(raw.values())
    return DualAssignment(spec.m - 1, {fs: w / norm for fs, w in raw.items()})


def eta_uniform_top(
    spec: ProblemSpec, grouping: VarianceGrouping | None = None
) -> DualAssignment | None:
    """Uniform weights over the (m-1)-subsets of the 2m largest-variance arms
    of the reduced set; zero elsewhere.  Returns ``None`` when the reduced
    set holds fewer than 2m arms."""
    if grouping is None:
        grouping = group_arms(spec.sigma2, spec.m)
    if grouping.top2m is None:
        return None
    count = math.comb(2 * spec.m, spec.m - 1)
    if count > SUBSET_BUDGET:
        raise EnumerationBudgetError(
            f"top-set assignment needs {count} subsets, over the {SUBSET_BUDGET} cap"
        )
    w = 1.0 / count
    weights = {
        frozenset(fs): w
        for fs in itertools.combinations(grouping.top2m, spec.m - 1)
    }
    return DualAssignment(spec.m - 1, weights)


def lower_bound_terms(spec: ProblemSpec, gr_mode: str = "heuristic") -> ComplexityTerms:
    """The lower-bound side of the budget dichotomy: the same three-term
    expression as ``complexity_terms``, reported without any universal
    constant in front."""
    return complexity_terms(spec, gr_mode=gr_mode)


def eta_to_json(eta: DualAssignment) -> str:
    """Serialize as a JSON list of [sorted-index-array, weight] pairs."""
    items = sorted(eta.weights.items(), key=lambda kv: sorted(kv[0]))
    return json.dumps([[sorted(fs), w] for fs, w in items])


def eta_from_json(text: str, subset_size: int | None = None) -> DualAssignment:
    doc = json.loads(text)
    if not isinstance(doc, list):
        raise ValueError("assignment document must be a JSON list")
    weights: dict[frozenset[int], float] = {}
    size: int | None = subset_size
    for entry in doc:
        try:
            indices, w = entry
            fs = frozenset(int(i) for i in indices)
            w = float(w)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"malformed assignment entry {entry!r}") from exc
        if size is None:
            size = len(fs)
        weights[fs] = weights.get(fs, 0.0) + w
    if size is None:
        raise ValueError("assignment document is empty")
    return DualAssignment(size, weights)
