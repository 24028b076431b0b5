"""Exact and Monte-Carlo moments of sums of independent distributions.

This is the ground-truth engine every property check leans on: exact values
come from convolution and joint-outcome enumeration, Monte Carlo from
seeded numpy generators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from . import _kernels
from .dist import MERGE_TOL, DiscreteDist, check_p, l_function, raw_moment
from .errors import ConvergenceError, DistributionError, SupportCapError

SUPPORT_CAP = 10**6
OUTCOME_CAP = 10**6
EPS_RESIDUAL_TOL = 1e-10
EPS_MAX_ITERS = 200

MachineLoads = Sequence[Sequence[DiscreteDist]]
"""One list of job-size distributions per machine."""


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    samples: int
    seed: int

    def as_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "samples": self.samples, "seed": self.seed}


ZERO = DiscreteDist.point(0.0)


def convolve(a: DiscreteDist, b: DiscreteDist, cap: int = SUPPORT_CAP) -> DiscreteDist:
    """Distribution of a + b for independent a, b."""
    if a.is_zero:
        return b
    if b.is_zero:
        return a
    if a.support_size * b.support_size > cap:
        raise SupportCapError(
            f"convolution would have {a.support_size * b.support_size} atoms (cap {cap})"
        )
    v, p = _kernels.convolve(a.values, a.probs, b.values, b.probs, MERGE_TOL)
    return DiscreteDist._trusted(v, p)


def sum_distribution(ds: Sequence[DiscreteDist], cap: int = SUPPORT_CAP) -> DiscreteDist:
    return reduce(lambda acc, d: convolve(acc, d, cap), ds, ZERO)


def sum_moment_exact(ds: Sequence[DiscreteDist], p: float, cap: int = SUPPORT_CAP) -> float:
    """E (sum ds)^p."""
    if len(ds) == 0:
        return 0.0
    return raw_moment(sum_distribution(ds, cap), p)


def _machine_sums(loads: MachineLoads, cap: int) -> list[DiscreteDist]:
    if len(loads) == 0:
        raise DistributionError("need at least one machine")
    return [sum_distribution(jobs, cap) for jobs in loads]


def expected_norm_of_sums(sums: Sequence[DiscreteDist], p: float, cap: int = OUTCOME_CAP) -> float:
    """E ||(S_1, ..., S_m)||_p from the per-machine load distributions."""
    p = check_p(p, allow_inf=True)
    outcomes = math.prod(s.support_size for s in sums)
    if outcomes > cap:
        raise SupportCapError(f"{outcomes} joint outcomes exceed cap {cap}; use Monte Carlo")
    if len(sums) == 1:
        return float(np.dot(sums[0].values, sums[0].probs))
    return _kernels.expected_norm([s.values for s in sums], [s.probs for s in sums], p)


def expected_lp_norm_exact(loads: MachineLoads, p: float, cap: int = OUTCOME_CAP) -> float:
    """Exact E ||S||_p.

    Machines are independent, so the joint law of the load vector is the
    product of the per-machine convolutions; the cap applies to that product.
    """
    return expected_norm_of_sums(_machine_sums(loads, SUPPORT_CAP), p, cap)


def _norm_samples(loads: MachineLoads, p: float, n: int, rng: np.random.Generator) -> np.ndarray:
    totals = np.zeros((len(loads), n))
    for i, jobs in enumerate(loads):
        for d in jobs:
            if d.is_point_mass:
                totals[i] += d.values[0]
                continue
            idx = np.searchsorted(d.cdf(), rng.random(n), side="right")
            totals[i] += d.values[np.minimum(idx, d.support_size - 1)]
    if math.isinf(p):
        return totals.max(axis=0)
    return np.power(np.power(totals, p).sum(axis=0), 1.0 / p)


def expected_lp_norm_mc(
    loads: MachineLoads, p: float, samples: int, seed: int, chunk: int = 100_000
) -> McEstimate:
    """Sample mean of ||S||_p with its standard error.

    Samples are drawn in chunks, each from its own child stream of
    ``SeedSequence(seed)``, and recombined in chunk order.
    """
    p = check_p(p, allow_inf=True)
    if samples < 2:
        raise ValueError("need at least 2 samples")
    n_chunks = -(-samples // chunk)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    total = 0.0
    total_sq = 0.0
    shift = None
    for k, child in enumerate(children):
        n = min(chunk, samples - k * chunk)
        xs = _norm_samples(loads, p, n, np.random.default_rng(child))
        if shift is None:
            shift = float(xs[0])
        xs = xs - shift
        total += float(xs.sum())
        total_sq += float(np.dot(xs, xs))
    mean = total / samples
    var = max(total_sq - samples * mean * mean, 0.0) / (samples - 1)
    return McEstimate(mean=mean + shift, stderr=math.sqrt(var / samples), samples=samples, seed=seed)


def l_function_sum(ds: Sequence[DiscreteDist], eps: float, p: float) -> float:
    return math.fsum(l_function(d, eps, p) for d in ds)


def solve_epsilon_star(
    ds: Sequence[DiscreteDist],
    p: float,
    tol: float = EPS_RESIDUAL_TOL,
    max_iters: int = EPS_MAX_ITERS,
) -> float:
    """The scale eps* at which the L-function masses of ``ds`` sum to 1.

    Bisection on log(eps); the mass is continuous and strictly decreasing in
    eps for any family that is not identically zero.
    """
    p = check_p(p)
    top = max((d.max_value for d in ds), default=0.0)
    if top <= 0:
        raise DistributionError("all variables are identically zero; eps* does not exist")

    def resid(log_eps: float) -> float:
        return l_function_sum(ds, math.exp(log_eps), p) - 1.0

    lo, hi = math.log(1e-12 * top), math.log(1e12 * top)
    while resid(lo) < 0:
        lo -= math.log(1e6)
    while resid(hi) > 0:
        hi += math.log(1e6)
    for _ in range(max_iters):
        mid = 0.5 * (lo + hi)
        r = resid(mid)
        if abs(r) <= tol:
            return math.exp(mid)
        if r > 0:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError(f"eps* bisection did not reach residual {tol} in {max_iters} iterations")


def latala_bounds(ds: Sequence[DiscreteDist], p: float) -> tuple[float, float]:
    """((eps*/10)^p, (e eps*)^p), which sandwich E (sum ds)^p."""
    eps = solve_epsilon_star(ds, p)
    return (eps / 10.0) ** p, (math.e * eps) ** p


def upper_bound_at(ds: Sequence[DiscreteDist], eps: float, p: float) -> float:
    """eps^p exp(p * sum nu_eps), an upper bound on E S^p for every eps > 0."""
    return eps**p * math.exp(p * l_function_sum(ds, eps, p))


def tail_probability(d: DiscreteDist, threshold: float) -> float:
    """Pr(X >= threshold), exact."""
    return float(d.probs[d.values >= threshold].sum())
