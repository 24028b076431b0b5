"""Objective evaluation and exhaustive baselines."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .assignment import IntegralAssignment
from .dist import DiscreteDist
from .errors import SupportCapError
from .instance import LbInstance
from .moments import OUTCOME_CAP, ZERO, convolve, expected_lp_norm_mc, expected_norm_of_sums

BRUTE_FORCE_CAP = 10**6
FALLBACK_MC_SAMPLES = 200_000


@dataclass(frozen=True)
class NormValue:
    method: str  # "exact" or "mc"
    value: float
    stderr: float | None = None
    seed: int | None = None

    def as_dict(self) -> dict:
        out = {"method": self.method, "value": self.value}
        if self.method == "mc":
            out.update(stderr=self.stderr, seed=self.seed)
        return out


class _SumCache:
    """Memoised per-machine load distributions keyed by job bitmask."""

    def __init__(self, inst: LbInstance):
        self.inst = inst
        self.memo: list[dict[int, DiscreteDist]] = [{0: ZERO} for _ in range(inst.m)]

    def get(self, i: int, mask: int) -> DiscreteDist:
        memo = self.memo[i]
        hit = memo.get(mask)
        if hit is None:
            low = mask & -mask
            hit = convolve(self.get(i, mask ^ low), self.inst.Y[i][low.bit_length() - 1])
            memo[mask] = hit
        return hit


def _masks(machine_of, m: int) -> list[int]:
    masks = [0] * m
    for j, i in enumerate(machine_of):
        masks[i] |= 1 << j
    return masks


def evaluate_assignment(
    inst: LbInstance,
    machine_of,
    p: float,
    *,
    cap: int = OUTCOME_CAP,
    mc_samples: int = FALLBACK_MC_SAMPLES,
    seed: int = 0,
    cache: _SumCache | None = None,
) -> NormValue:
    """E ||S||_p of an integral assignment: exact when the joint outcome grid
    fits under ``cap``, otherwise a seeded Monte-Carlo estimate."""
    machine_of = tuple(machine_of.machine_of) if isinstance(machine_of, IntegralAssignment) else tuple(machine_of)
    cache = cache or _SumCache(inst)
    try:
        sums = [cache.get(i, mask) for i, mask in enumerate(_masks(machine_of, inst.m))]
        return NormValue("exact", expected_norm_of_sums(sums, p, cap))
    except SupportCapError:
        est = expected_lp_norm_mc(inst.loads(machine_of), p, mc_samples, seed)
        return NormValue("mc", est.mean, est.stderr, seed)


@dataclass(frozen=True)
class BruteForceResult:
    assignment: IntegralAssignment
    value: float
    exact: bool
    evaluated: int


def brute_force_opt(
    inst: LbInstance,
    p: float,
    *,
    cap: int = BRUTE_FORCE_CAP,
    outcome_cap: int = OUTCOME_CAP,
    mc_samples: int = FALLBACK_MC_SAMPLES,
    seed: int = 0,
) -> BruteForceResult:
    """Minimise E ||S||_p over all m^n assignments in lexicographic order.

    The first minimiser wins ties. If any assignment had to be evaluated by
    Monte Carlo the result is flagged ``exact=False``.
    """
    total = inst.m**inst.n
    if total > cap:
        raise SupportCapError(f"m^n = {total} assignments exceed the brute-force cap {cap}")
    cache = _SumCache(inst)
    best, best_val, exact = None, math.inf, True
    for machine_of in itertools.product(range(inst.m), repeat=inst.n):
        val = evaluate_assignment(
            inst, machine_of, p, cap=outcome_cap, mc_samples=mc_samples, seed=seed, cache=cache
        )
        exact &= val.method == "exact"
        if val.value < best_val:
            best, best_val = machine_of, val.value
    return BruteForceResult(IntegralAssignment(best), best_val, exact, total)
