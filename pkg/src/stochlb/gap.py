"""Shmoys-Tardos rounding for the generalized assignment problem.

Given a fractional assignment meeting per-machine time budgets ``A_i`` and a
global cost budget ``B``, the rounded assignment costs no more than the
fractional one and overshoots each ``A_i`` by at most the largest time of a
job fractionally placed on ``i``.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .assignment import POLYTOPE_TOL, FractionalAssignment, IntegralAssignment
from .errors import InfeasibleError

DUST = 1e-12
GUARANTEE_TOL = 1e-7


@dataclass(frozen=True)
class GapInstance:
    a: np.ndarray  # processing times, m x n
    b: np.ndarray  # costs, m x n
    A: np.ndarray  # per-machine time budgets
    B: float  # cost budget

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        A = np.asarray(self.A, dtype=float).ravel()
        if a.shape != b.shape or a.ndim != 2 or A.shape != (a.shape[0],):
            raise ValueError("inconsistent GAP dimensions")
        for arr in (a, b, A, np.array([self.B])):
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValueError("GAP data must be finite and non-negative")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", float(self.B))

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def n(self) -> int:
        return self.a.shape[1]


@dataclass
class Pouring:
    """Slots per machine and the (slot, job, amount) edges created by pouring."""

    slot_machine: list[int] = field(default_factory=list)
    edges: list[tuple[int, int, float]] = field(default_factory=list)

    def mass_per_job(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        for _, j, amt in self.edges:
            out[j] += amt
        return out


def _clean(x: np.ndarray) -> np.ndarray:
    x = np.where(x < DUST, 0.0, x)
    return x / x.sum(axis=0, keepdims=True)


def pour(gap: GapInstance, x: np.ndarray) -> Pouring:
    """Fill ceil(sum_j x_ij) unit slots per machine with jobs in order of
    non-increasing processing time (ties by job index)."""
    out = Pouring()
    for i in range(gap.m):
        jobs = [j for j in range(gap.n) if x[i, j] > 0]
        if not jobs:
            continue
        jobs.sort(key=lambda j: (-gap.a[i, j], j))
        n_slots = max(1, math.ceil(float(x[i].sum()) - 1e-9))
        first = len(out.slot_machine)
        out.slot_machine.extend([i] * n_slots)
        slot, room = first, 1.0
        for j in jobs:
            left = float(x[i, j])
            while left > 0:
                last = slot == first + n_slots - 1
                amt = left if last else min(left, room)
                out.edges.append((slot, j, amt))
                left -= amt
                room -= amt
                if room <= DUST and not last:
                    slot, room = slot + 1, 1.0
                if left <= DUST:
                    break
    return out


def min_cost_perfect_matching(
    n_left: int, n_right: int, edges: list[tuple[int, int, float]]
) -> tuple[list[int], float]:
    """Exact min-cost matching saturating every left vertex.

    Successive shortest augmenting paths with Dijkstra on reduced costs.
    Edge costs must be non-negative. Returns ``(right_of_left, total_cost)``.
    """
    adj: list[list[tuple[int, float]]] = [[] for _ in range(n_left)]
    cost: dict[tuple[int, int], float] = {}
    for l, r, c in edges:
        if c < 0:
            raise ValueError("edge costs must be non-negative")
        key = (l, r)
        if key not in cost or c < cost[key]:
            if key not in cost:
                adj[l].append((r, c))
            cost[key] = c
    adj = [[(r, cost[(l, r)]) for r, _ in row] for l, row in enumerate(adj)]
    match_l = [-1] * n_left
    match_r = [-1] * n_right
    pl = [0.0] * n_left
    pr = [0.0] * n_right
    inf = math.inf
    for s in range(n_left):
        dl = [inf] * n_left
        dr = [inf] * n_right
        prev = [-1] * n_right
        dl[s] = 0.0
        heap = [(0.0, 0, s)]
        while heap:
            d, side, u = heapq.heappop(heap)
            if side == 0:
                if d > dl[u]:
                    continue
                for r, c in adj[u]:
                    if match_l[u] == r:
                        continue
                    nd = d + max(c + pl[u] - pr[r], 0.0)
                    if nd < dr[r]:
                        dr[r], prev[r] = nd, u
                        heapq.heappush(heap, (nd, 1, r))
            else:
                if d > dr[u]:
                    continue
                l = match_r[u]
                if l >= 0:
                    nd = d + max(-cost[(l, u)] + pr[u] - pl[l], 0.0)
                    if nd < dl[l]:
                        dl[l] = nd
                        heapq.heappush(heap, (nd, 0, l))
        target, best = -1, inf
        for r in range(n_right):
            if match_r[r] < 0 and dr[r] < best:
                target, best = r, dr[r]
        if target < 0:
            raise InfeasibleError(f"no augmenting path for left vertex {s}; matching infeasible")
        for v in range(n_left):
            pl[v] += min(dl[v], best)
        for v in range(n_right):
            pr[v] += min(dr[v], best)
        r = target
        while True:
            l = prev[r]
            nxt = match_l[l]
            match_l[l], match_r[r] = r, l
            if l == s:
                break
            r = nxt
    return match_l, math.fsum(cost[(l, match_l[l])] for l in range(n_left))


def round_st(gap: GapInstance, x) -> IntegralAssignment:
    """Round a fractional GAP solution to an integral assignment."""
    frac = x.x if isinstance(x, FractionalAssignment) else np.asarray(x, dtype=float)
    if frac.shape != gap.a.shape:
        raise ValueError("x shape does not match the GAP instance")
    FractionalAssignment(frac).check(POLYTOPE_TOL)
    frac_cost = float((gap.b * frac).sum())
    if frac_cost > gap.B + GUARANTEE_TOL:
        raise ValueError(f"fractional cost {frac_cost} exceeds budget {gap.B}")
    frac = _clean(frac)
    pouring = pour(gap, frac)
    edges = [(j, slot, gap.b[pouring.slot_machine[slot], j]) for slot, j, amt in pouring.edges if amt > 0]
    match, _ = min_cost_perfect_matching(gap.n, len(pouring.slot_machine), edges)
    return IntegralAssignment(tuple(pouring.slot_machine[s] for s in match))


@dataclass
class GapAudit:
    cost: float
    frac_cost: float
    B: float
    loads: np.ndarray
    frac_loads: np.ndarray
    A: np.ndarray
    max_a: np.ndarray  # largest a_ij over jobs fractionally on i
    cost_ok: bool
    loads_ok: bool
    factors: dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.cost_ok and self.loads_ok

    @property
    def cost_ratio(self) -> float:
        return self.cost / self.B if self.B > 0 else (0.0 if self.cost == 0 else math.inf)

    def as_dict(self) -> dict:
        return {
            "cost": self.cost,
            "frac_cost": self.frac_cost,
            "B": self.B,
            "cost_ratio": self.cost_ratio,
            "loads": self.loads.tolist(),
            "load_limits": (self.A + self.max_a).tolist(),
            "cost_ok": self.cost_ok,
            "loads_ok": self.loads_ok,
            "factors": self.factors,
        }


def verify_gap_guarantees(
    gap: GapInstance,
    x_frac,
    x_int: IntegralAssignment,
    parts: dict[str, tuple[np.ndarray, np.ndarray]] | None = None,
) -> GapAudit:
    """Check the rounding guarantees.

    ``parts`` optionally maps a name to ``(coeffs, rhs)`` of a disaggregated
    constraint (coeffs m x n, rhs scalar or per-machine vector); its factor
    ``max(lhs / rhs)`` under ``x_int`` is reported.
    """
    frac = x_frac.x if isinstance(x_frac, FractionalAssignment) else np.asarray(x_frac, dtype=float)
    xi = x_int.matrix(gap.m)
    cost = float((gap.b * xi).sum())
    frac_cost = float((gap.b * frac).sum())
    loads = (gap.a * xi).sum(axis=1)
    frac_loads = (gap.a * frac).sum(axis=1)
    support = frac > DUST
    max_a = np.where(support, gap.a, 0.0).max(axis=1) if gap.n else np.zeros(gap.m)
    cost_ok = cost <= frac_cost + GUARANTEE_TOL and cost <= gap.B + GUARANTEE_TOL
    met = frac_loads <= gap.A + GUARANTEE_TOL
    loads_ok = bool(np.all(~met | (loads <= gap.A + max_a + GUARANTEE_TOL)))
    factors = {}
    for name, (coeffs, rhs) in (parts or {}).items():
        lhs = (coeffs * xi).sum(axis=1)
        rhs = np.asarray(rhs, dtype=float)
        if rhs.ndim == 0:
            lhs, rhs = np.array([lhs.sum()]), rhs.reshape(1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, math.inf, 0.0))
        factors[name] = float(ratio.max()) if ratio.size else 0.0
    return GapAudit(cost, frac_cost, gap.B, loads, frac_loads, gap.A, max_a, cost_ok, loads_ok, factors)
