"""Bandit instance generators and serialization.

Instances pair a mean vector with the known variance proxies.  The generators
cover the three-level "hard" mean profiles used for validity testing, a
parameterized random instance, and a huge structured variance family that is
kept run-length encoded because its arm count is astronomically large.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from math import fsum
from typing import Sequence

import numpy as np

from .core import entropy_rle

__all__ = [
    "BanditInstance",
    "hard_instance_top",
    "hard_instance_pivot",
    "random_instance",
    "log_uniform_sigma2",
    "illustrative_family",
    "materialize_profile",
    "instance_to_json",
    "instance_from_json",
    "profile_to_json",
    "profile_from_json",
]

_KINDS = ("gaussian", "scripted")

# Largest profile we will expand into one value per arm (2**25 doubles).
MATERIALIZE_CAP = 2**25


@dataclass(frozen=True)
class BanditInstance:
    """Ground truth for a simulation: per-arm means, variance proxies, and a
    per-arm distribution tag.  Gaussian arms draw N(mean, sigma2)."""

    means: tuple[float, ...]
    sigma2: tuple[float, ...]
    kinds: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "means", tuple(float(v) for v in self.means))
        object.__setattr__(self, "sigma2", tuple(float(v) for v in self.sigma2))
        object.__setattr__(self, "kinds", tuple(str(k) for k in self.kinds))
        if not self.means:
            raise ValueError("an instance needs at least one arm")
        if not len(self.means) == len(self.sigma2) == len(self.kinds):
            raise ValueError("means, sigma2 and kinds must have equal length")
        for v in self.sigma2:
            if not (v > 0.0 and math.isfinite(v)):
                raise ValueError("all variance proxies must be positive and finite")
        for k in self.kinds:
            if k not in _KINDS:
                raise ValueError(f"unknown arm kind {k!r}")

    @property
    def n(self) -> int:
        return len(self.means)

    @staticmethod
    def gaussian(means: Sequence[float], sigma2: Sequence[float]) -> "BanditInstance":
        means = tuple(means)
        return BanditInstance(means, tuple(sigma2), ("gaussian",) * len(means))


def _check_margin(margin: float, epsilon: float | None) -> None:
    if not (margin > 0.0 and math.isfinite(margin)):
        raise ValueError("margin must be positive")
    if epsilon is not None and margin <= epsilon:
        warnings.warn(
            "margin does not exceed epsilon: the zero-mean arm is also an "
            "acceptable answer, so the instance no longer has a unique one",
            stacklevel=3,
        )


def hard_instance_top(
    n: int,
    m: int,
    winners: Sequence[int],
    pivot: int,
    margin: float,
    sigma2: Sequence[float],
    epsilon: float | None = None,
) -> BanditInstance:
    """Three-level instance whose only acceptable answer is ``winners``.

    The ``m`` winner arms get mean ``margin``, the pivot arm mean 0, and all
    remaining arms ``-margin``.  For any tolerance strictly below ``margin``
    the winner set is the unique acceptable selection.  Passing the intended
    ``epsilon`` triggers a warning when the margin does not exceed it.
    """
    winners = tuple(int(i) for i in winners)
    pivot = int(pivot)
    if len(set(winners)) != m:
        raise ValueError("winners must hold exactly m distinct arms")
    if pivot in winners:
        raise ValueError("pivot arm cannot be a winner")
    if not all(0 <= i < n for i in (*winners, pivot)):
        raise ValueError("arm indices out of range")
    if len(sigma2) != n:
        raise ValueError("sigma2 must have length n")
    _check_margin(margin, epsilon)
    means = [-margin] * n
    for i in winners:
        means[i] = margin
    means[pivot] = 0.0
    return BanditInstance.gaussian(means, sigma2)


def hard_instance_pivot(
    n: int,
    m: int,
    raised: Sequence[int],
    pivot: int,
    margin: float,
    sigma2: Sequence[float],
    epsilon: float | None = None,
) -> BanditInstance:
    """Three-level instance whose only acceptable answer is ``raised`` plus
    the pivot arm.

    The ``m - 1`` raised arms get mean ``margin``, the pivot arm mean 0, and
    the rest ``-margin``; the pivot is then the m-th best arm and must be
    selected whenever the tolerance is strictly below ``margin``.
    """
    raised = tuple(int(i) for i in raised)
    pivot = int(pivot)
    if len(set(raised)) != m - 1:
        raise ValueError("raised must hold exactly m-1 distinct arms")
    if pivot in raised:
        raise ValueError("pivot arm cannot be raised")
    if not all(0 <= i < n for i in (*raised, pivot)):
        raise ValueError("arm indices out of range")
    if len(sigma2) != n:
        raise ValueError("sigma2 must have length n")
    _check_margin(margin, epsilon)
    means = [-margin] * n
    for i in raised:
        means[i] = margin
    means[pivot] = 0.0
    return BanditInstance.gaussian(means, sigma2)


def log_uniform_sigma2(seed: int, n: int, low: float, high: float) -> tuple[float, ...]:
    """Variance profile with log(sigma2) uniform on [log(low), log(high)],
    deterministic in the seed."""
    if not (0.0 < low <= high):
        raise ValueError("need 0 < low <= high")
    rng = np.random.default_rng(seed)
    draws = np.exp(rng.uniform(math.log(low), math.log(high), size=int(n)))
    return tuple(float(v) for v in draws)


def random_instance(
    seed: int,
    n: int,
    mean_low: float,
    mean_high: float,
    sigma2_spec,
) -> BanditInstance:
    """Random instance, deterministic in the seed.

    Means are i.i.d. uniform on [mean_low, mean_high].  ``sigma2_spec`` is
    either an explicit sequence of variances (copied verbatim) or a tuple
    ``("log_uniform", low, high)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if mean_low > mean_high:
        raise ValueError("mean_low must not exceed mean_high")
    rng = np.random.default_rng(seed)
    means = rng.uniform(mean_low, mean_high, size=n)
    if (
        isinstance(sigma2_spec, tuple)
        and len(sigma2_spec) == 3
        and sigma2_spec[0] == "log_uniform"
    ):
        _, low, high = sigma2_spec
        if not (0.0 < low <= high):
            raise ValueError("need 0 < low <= high")
        sigma2 = tuple(
            float(v) for v in np.exp(rng.uniform(math.log(low), math.log(high), size=n))
        )
    else:
        sigma2 = tuple(float(v) for v in sigma2_spec)
        if len(sigma2) != n:
            raise ValueError("explicit sigma2 must have length n")
    return BanditInstance.gaussian(tuple(float(v) for v in means), sigma2)


def illustrative_family(k: int) -> tuple[tuple[tuple[float, int], ...], dict]:
    """Structured variance family indexed by an integer ``k >= 2``.

    The profile asks for ``m = 2**k`` arms out of ``n = 2**(k*k)``.  With
    ``levels = ceil(log2(k))`` it holds ``2**i`` arms of variance ``2**-i``
    for each ``i < levels`` and puts the remaining ``n - 2**levels + 1`` arms
    at the tiny variance ``levels / k * 2**-(k*k)``.  Because ``n`` is
    astronomically large the profile is returned run-length encoded.

    The accompanying ``expected`` map carries closed-form quantities of the
    family, all computed from the generated profile itself:

    - ``sum_g_less`` / ``sum_g_more``: variance mass of the sparse bands and
      of the crowded bulk band.
    - ``ent_g_less_bands``: the banded part of the sparse-arm entropy, i.e.
      ``sum_b (band mass / total) * ln(band size)``; equals
      ``ln(2)/2 * (levels - 1)`` for this family.
    - ``ent_g_less_arms``: the full per-arm entropy of the sparse profile,
      which exceeds the banded part by exactly ``ln(levels)`` (the entropy of
      the equal band masses).
    """
    if not isinstance(k, int) or k < 2:
        raise ValueError("k must be an integer >= 2")
    levels = (k - 1).bit_length()  # ceil(log2(k)) for k >= 2
    m = 2**k
    n = 2 ** (k * k)
    bulk_count = n - 2**levels + 1
    bulk_value = float(Fraction(levels, k * 2 ** (k * k)))
    sparse = tuple((2.0**-i, 2**i) for i in range(levels))
    profile = sparse + ((bulk_value, bulk_count),)

    sum_less = fsum(v * c for v, c in sparse)
    total_less = sum_less
    ent_less_bands = fsum((v * c / total_less) * math.log(c) for v, c in sparse)
    expected = {
        "arm_count": n,
        "m": m,
        "levels": levels,
        "sum_g_less": sum_less,
        "sum_g_more": bulk_count * bulk_value,
        "ent_g_less_bands": ent_less_bands,
        "ent_g_less_arms": entropy_rle(sparse),
    }
    return profile, expected


def materialize_profile(
    profile: Sequence[tuple[float, int]], cap: int = MATERIALIZE_CAP
) -> tuple[float, ...]:
    """Expand an RLE profile into one value per arm.  Refuses profiles whose
    arm count exceeds ``cap`` (default 2**25)."""
    total = sum(int(c) for _, c in profile)
    if total > cap:
        raise ValueError(f"profile holds {total} arms; cap is {cap}")
    out: list[float] = []
    for v, c in profile:
        out.extend([float(v)] * int(c))
    return tuple(out)


def instance_to_json(instance: BanditInstance) -> str:
    """Serialize an instance; floats round-trip bit-exactly."""
    kinds = set(instance.kinds)
    if kinds != {"gaussian"}:
        raise ValueError("only all-gaussian instances serialize")
    doc = {
        "n": instance.n,
        "means": list(instance.means),
        "sigma2": list(instance.sigma2),
        "kind": "gaussian",
    }
    return json.dumps(doc)


def instance_from_json(text: str) -> BanditInstance:
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise ValueError("instance document must be a JSON object")
    try:
        n = int(doc["n"])
        means = [float(v) for v in doc["means"]]
        sigma2 = [float(v) for v in doc["sigma2"]]
        kind = doc.get("kind", "gaussian")
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed instance document: {exc}") from exc
    if kind != "gaussian":
        raise ValueError(f"unsupported instance kind {kind!r}")
    if len(means) != n or len(sigma2) != n:
        raise ValueError("instance document lengths do not match n")
    return BanditInstance.gaussian(means, sigma2)


def profile_to_json(
    dense: Sequence[float] | None = None,
    rle: Sequence[tuple[float, int]] | None = None,
) -> str:
    """Serialize a variance profile, either dense ({"sigma2": [...]}) or
    run-length encoded ({"sigma2_rle": [[value, count], ...]})."""
    if (dense is None) == (rle is None):
        raise ValueError("pass exactly one of dense or rle")
    if dense is not None:
        values = [float(v) for v in dense]
        return json.dumps({"n": len(values), "sigma2": values})
    pairs = [[float(v), int(c)] for v, c in rle]
    return json.dumps({"n": sum(c for _, c in pairs), "sigma2_rle": pairs})


def profile_from_json(text: str) -> tuple[str, tuple]:
    """Parse a profile document.  Returns ``("dense", values)`` or
    ``("rle", pairs)``."""
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise ValueError("profile document must be a JSON object")
    if "sigma2" in doc:
        values = tuple(float(v) for v in doc["sigma2"])
        if "n" in doc and int(doc["n"]) != len(values):
            raise ValueError("profile document length does not match n")
        return "dense", values
    if "sigma2_rle" in doc:
        pairs = tuple((float(v), int(c)) for v, c in doc["sigma2_rle"])
        if "n" in doc and int(doc["n"]) != sum(c for _, c in pairs):
            raise ValueError("profile document count does not match n")
        return "rle", pairs
    raise ValueError("profile document needs a sigma2 or sigma2_rle field")
