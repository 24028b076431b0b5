"""Finite-support non-negative discrete distributions and their functionals.

All functionals (moments, the L-function, effective size) are evaluated in
log space so large exponents and scales stay finite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import DistributionError

MERGE_TOL = 1e-12
PROB_TOL = 1e-12
# below this ell the effective size is replaced by the expectation
BETA_ELL_FLOOR = 1.0 + 1e-9


def check_p(p: float, *, allow_inf: bool = False) -> float:
    p = float(p)
    if math.isnan(p) or p < 1:
        raise DistributionError(f"p must be >= 1, got {p}")
    if math.isinf(p) and not allow_inf:
        raise DistributionError("p must be finite here")
    return p


@dataclass(frozen=True, eq=False)
class DiscreteDist:
    """Distribution of a non-negative random variable with finite support.

    ``values`` is strictly increasing, ``probs`` is positive and sums to 1.
    Use :meth:`from_pairs` (validating) rather than the raw constructor.
    """

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        self.values.setflags(write=False)
        self.probs.setflags(write=False)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]], *, prob_tol: float = PROB_TOL) -> "DiscreteDist":
        """Build from ``[[value, prob], ...]``.

        Zero-probability atoms are dropped and near-equal values merged. The
        total mass must be within ``prob_tol`` of 1; probabilities are kept
        as given so serialisation round-trips bit for bit.
        """
        arr = np.asarray([tuple(pair) for pair in pairs], dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] != 2:
            raise DistributionError("distribution must be a non-empty list of [value, prob] pairs")
        return cls.from_arrays(arr[:, 0], arr[:, 1], prob_tol=prob_tol)

    @classmethod
    def from_arrays(cls, values, probs, *, prob_tol: float = PROB_TOL) -> "DiscreteDist":
        values = np.asarray(values, dtype=np.float64).ravel()
        probs = np.asarray(probs, dtype=np.float64).ravel()
        if values.shape != probs.shape or values.size == 0:
            raise DistributionError("values and probs must be non-empty and of equal length")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(probs))):
            raise DistributionError("values and probs must be finite")
        if np.any(values < 0):
            raise DistributionError("values must be non-negative")
        if np.any(probs < 0) or np.any(probs > 1 + prob_tol):
            raise DistributionError("probabilities must lie in [0, 1]")
        total = probs.sum()
        if abs(total - 1.0) > prob_tol:
            raise DistributionError(f"probabilities sum to {total!r}, not 1")
        keep = probs > 0
        values, probs = values[keep], probs[keep]
        order = np.argsort(values, kind="stable")
        v, p = _kernels.merge_sorted(values[order], probs[order], MERGE_TOL)
        return cls(v, p)

    @classmethod
    def _trusted(cls, values: np.ndarray, probs: np.ndarray) -> "DiscreteDist":
        # already sorted and merged by a kernel
        return cls(values, probs)

    @classmethod
    def point(cls, c: float) -> "DiscreteDist":
        return cls.from_pairs([[c, 1.0]])

    @classmethod
    def bernoulli(cls, q: float, value: float = 1.0) -> "DiscreteDist":
        """``value`` w.p. ``q``, else 0."""
        return cls.from_pairs([[0.0, 1.0 - q], [value, q]])

    @property
    def support_size(self) -> int:
        return int(self.values.size)

    @property
    def max_value(self) -> float:
        return float(self.values[-1])

    @property
    def is_zero(self) -> bool:
        return self.values.size == 1 and self.values[0] == 0.0

    @property
    def is_point_mass(self) -> bool:
        return self.values.size == 1

    def pairs(self) -> list[list[float]]:
        return [[float(v), float(p)] for v, p in zip(self.values, self.probs)]

    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.probs)
        c[-1] = 1.0
        return c

    def __eq__(self, other):
        if not isinstance(other, DiscreteDist):
            return NotImplemented
        return np.array_equal(self.values, other.values) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash((self.values.tobytes(), self.probs.tobytes()))

    def __repr__(self):
        atoms = ", ".join(f"{v:g}: {p:g}" for v, p in zip(self.values, self.probs))
        return f"DiscreteDist({{{atoms}}})"


def expectation(d: DiscreteDist) -> float:
    return float(np.dot(d.values, d.probs))


def raw_moment(d: DiscreteDist, p: float) -> float:
    """E X^p. Raises OverflowError if some value**p is not representable."""
    p = check_p(p)
    with np.errstate(over="raise"):
        try:
            powers = np.power(d.values, p)
        except FloatingPointError as exc:
            raise OverflowError(f"value**{p} overflows") from exc
    return float(np.dot(powers, d.probs))


def l_function(d: DiscreteDist, eps: float, p: float) -> float:
    """The L-function (1/p) ln E (1 + X/eps)^p."""
    if not eps > 0:
        raise DistributionError(f"eps must be positive, got {eps}")
    p = check_p(p)
    if d.is_zero:
        return 0.0
    val = _kernels.l_function(d.values, d.probs, float(eps), p)
    if not math.isfinite(val):
        raise OverflowError("L-function is not finite at this scale")
    return max(val, 0.0)


def capped_l_function(d: DiscreteDist, eps: float, p: float) -> float:
    return min(1.0, l_function(d, eps, p))


def effective_size(d: DiscreteDist, ell: float) -> float:
    """beta_ell(X) = ln E exp(X ln ell) / ln ell, with beta_1 = E X."""
    ell = float(ell)
    if math.isnan(ell) or ell < 1:
        raise DistributionError(f"ell must be >= 1, got {ell}")
    if ell < BETA_ELL_FLOOR:
        return expectation(d)
    s = math.log(ell)
    val = _kernels.log_mgf(d.values, d.probs, s) / s
    if not math.isfinite(val):
        raise OverflowError("effective size overflowed")
    # beta lies in [E X, max X]; clamping guards the last-ulp rounding
    return min(max(val, expectation(d)), float(d.values.max()))


def truncate_split(d: DiscreteDist, theta: float) -> tuple[DiscreteDist, DiscreteDist]:
    """Marginals of X 1(X <= theta) and X 1(X > theta)."""
    if not theta > 0:
        raise DistributionError(f"theta must be positive, got {theta}")
    small = d.values <= theta
    zero = np.zeros(1)
    low = DiscreteDist.from_arrays(
        np.concatenate([zero, d.values[small]]),
        np.concatenate([[d.probs[~small].sum()], d.probs[small]]),
    )
    high = DiscreteDist.from_arrays(
        np.concatenate([zero, d.values[~small]]),
        np.concatenate([[d.probs[small].sum()], d.probs[~small]]),
    )
    return low, high


def scale(d: DiscreteDist, c: float) -> DiscreteDist:
    if not c > 0:
        raise DistributionError(f"scale factor must be positive, got {c}")
    if c == 1:
        return d
    return DiscreteDist.from_arrays(d.values * c, d.probs)
