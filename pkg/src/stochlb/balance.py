"""Stochastic lp load balancing on unrelated machines.

Pipeline for a guess ``T`` of the optimum:

1. split every job into its truncated part (values <= alpha*T) and its
   exceptional part;
2. solve the starting LP: an exceptional-mass budget, multi-scale
   L-function constraints (through per-machine auxiliaries ``z_i``),
   effective-size constraints over every machine subset (added lazily by
   separation), a coarse p-moment budget and the assignment polytope;
3. pick one L-function scale ``v_bar[i]`` and one effective-size scale
   ``l_bar[i]`` per machine from that fractional point and solve the much
   smaller reduced LP;
4. fold the reduced LP into a GAP instance and round it.

``T`` itself comes from a geometric bisection on starting-LP feasibility.
"""
from __future__ import annotations

import bisect
import math
import time
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np

from .assignment import FractionalAssignment, IntegralAssignment
from .dist import (
    DiscreteDist,
    capped_l_function,
    check_p,
    effective_size,
    expectation,
    raw_moment,
    scale,
    truncate_split,
)
from .errors import InfeasibleError, LimitError
from .evaluate import NormValue, evaluate_assignment
from .gap import GapInstance, round_st, verify_gap_guarantees
from .instance import LbInstance
from .lp import FEAS_TOL, Constraint, LinearProgram, LpSolution, LpStatus, solve_lp, solve_with_separation

TILDE_SCALE = 44.0
Z_CAP = 3.0
REDUCED_FEAS_TOL = 1e-6


@dataclass
class SolverConfig:
    alpha: float = 0.1
    C: float = 8.0
    v_grid_ratio: float = 2.0
    bisection_rel_tol: float = 0.05
    max_bisection_iters: int = 40
    max_rounds: int = 200
    mc_samples: int = 200_000
    seed: int = 0
    ratio_guard: float = 20.0
    # "truncated" uses E J'^p in the coarse p-moment budget, "full" uses E J^p
    coarse_part: str = "truncated"
    # right-hand side of the reduced effective-size rows: "C" or "1"
    reduced_beta_rhs: str = "C"
    max_bracket_doublings: int = 12
    outcome_cap: int = 10**6

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        inv = 1.0 / self.alpha
        if abs(inv - round(inv)) > 1e-9:
            raise ValueError("1/alpha must be an integer")
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not self.v_grid_ratio > 1:
            raise ValueError("v_grid_ratio must exceed 1")
        if self.coarse_part not in ("truncated", "full"):
            raise ValueError("coarse_part must be 'truncated' or 'full'")
        if self.reduced_beta_rhs not in ("C", "1"):
            raise ValueError("reduced_beta_rhs must be 'C' or '1'")

    def v_min(self, p: float) -> int:
        return max(math.ceil((1.0 / self.alpha) ** p - 1e-9), 100)

    @property
    def beta_rhs(self) -> float:
        return self.C if self.reduced_beta_rhs == "C" else 1.0

    @classmethod
    def from_dict(cls, doc: dict) -> "SolverConfig":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def as_dict(self) -> dict:
        return asdict(self)


def v_grid(m: int, p: float, cfg: SolverConfig) -> list[int]:
    """Integer scales {v_min * r^t} plus the top value M = max(m, v_min)."""
    lo = cfg.v_min(p)
    top = max(m, lo)
    grid = {lo, top}
    v = float(lo)
    while v < top:
        grid.add(min(int(round(v)), top))
        v *= cfg.v_grid_ratio
    return sorted(grid)


def x_name(i: int, j: int) -> str:
    return f"x[{i},{j}]"


class Prepared:
    """Per-(machine, job) quantities at a fixed guess ``T``."""

    def __init__(self, inst: LbInstance, p: float, T: float, cfg: SolverConfig):
        if not T > 0:
            raise ValueError("T must be positive")
        self.inst, self.p, self.T, self.cfg = inst, p, T, cfg
        m, n = inst.m, inst.n
        theta = cfg.alpha * T
        self.truncated: list[list[DiscreteDist]] = []
        self.exceptional_mean = np.zeros((m, n))
        self.coarse = np.zeros((m, n))
        for i in range(m):
            row = []
            for j in range(n):
                low, high = truncate_split(inst.Y[i][j], theta)
                row.append(low)
                self.exceptional_mean[i, j] = expectation(high)
                base = low if cfg.coarse_part == "truncated" else inst.Y[i][j]
                self.coarse[i, j] = raw_moment(base, p)
            self.truncated.append(row)
        self.tilde = [[scale(d, 1.0 / TILDE_SCALE) for d in row] for row in self.truncated]
        self.normalised = [[scale(d, 1.0 / T) for d in row] for row in self.truncated]
        self._nu: dict[float, np.ndarray] = {}
        self._beta: dict[int, np.ndarray] = {}

    @property
    def m(self) -> int:
        return self.inst.m

    @property
    def n(self) -> int:
        return self.inst.n

    @cached_property
    def grid(self) -> list[int]:
        return v_grid(self.m, self.p, self.cfg)

    @cached_property
    def coarse_rhs(self) -> float:
        return (4.0 * self.T) ** self.p

    def nu_hat(self, v: float) -> np.ndarray:
        """Capped L-function of J~_ij at scale T / v^(1/p)."""
        hit = self._nu.get(v)
        if hit is None:
            eps = self.T / v ** (1.0 / self.p)
            hit = np.array([[capped_l_function(d, eps, self.p) for d in row] for row in self.tilde])
            self._nu[v] = hit
        return hit

    def beta(self, ell: int) -> np.ndarray:
        """Effective size at scale ell of J'_ij / T."""
        hit = self._beta.get(ell)
        if hit is None:
            hit = np.array([[effective_size(d, ell) for d in row] for row in self.normalised])
            self._beta[ell] = hit
        return hit

    @cached_property
    def cost(self) -> np.ndarray:
        """Merged GAP cost b_ij; also the objective of both LPs."""
        return self.exceptional_mean / (2.0 * self.T) + self.coarse / self.coarse_rhs


def _assignment_rows(lp: LinearProgram, m: int, n: int) -> None:
    for j in range(n):
        lp.add_constraint({x_name(i, j): 1.0 for i in range(m)}, "==", 1.0, f"assign[{j}]")


def _x_matrix(values: dict, m: int, n: int) -> np.ndarray:
    return np.array([[values[x_name(i, j)] for j in range(n)] for i in range(m)])


def build_starting_lp(inst: LbInstance, p: float, T: float, cfg: SolverConfig, prep: Prepared | None = None):
    """Starting LP minus the subset-indexed effective-size family.

    Returns ``(lp, oracle, prep)``; ``oracle`` separates the missing family.
    """
    prep = prep or Prepared(inst, p, T, cfg)
    m, n = inst.m, inst.n
    lp = LinearProgram(f"start(T={T:.6g})")
    for i in range(m):
        for j in range(n):
            lp.add_variable(x_name(i, j), 0.0, 1.0)
    lo_z = -1.0 / cfg.v_min(p)
    for i in range(m):
        lp.add_variable(f"z[{i}]", lo_z, Z_CAP)
    lp.add_constraint(
        {x_name(i, j): prep.exceptional_mean[i, j] for i in range(m) for j in range(n)}, "<=", 2.0 * T, "exceptional"
    )
    for v in prep.grid:
        nu = prep.nu_hat(v)
        for i in range(m):
            coeffs = {x_name(i, j): nu[i, j] / v for j in range(n)}
            coeffs[f"z[{i}]"] = -1.0
            lp.add_constraint(coeffs, "<=", 1.0 / v, f"scale[v={v},i={i}]")
    lp.add_constraint({f"z[{i}]": 1.0 for i in range(m)}, "<=", 3.0, "scale-sum")
    lp.add_constraint(
        {x_name(i, j): prep.coarse[i, j] for i in range(m) for j in range(n)}, "<=", prep.coarse_rhs, "coarse"
    )
    _assignment_rows(lp, m, n)
    lp.set_objective({x_name(i, j): prep.cost[i, j] for i in range(m) for j in range(n)}, "minimize")

    def oracle(sol: LpSolution) -> list[Constraint]:
        return linf_separation(FractionalAssignment(_x_matrix(sol.values, m, n)), prep)

    return lp, oracle, prep


def linf_separation(x: FractionalAssignment, prep: Prepared) -> list[Constraint]:
    """Most violated effective-size subset constraint for every cardinality k.

    For fixed k the left side is maximised by the k machines with the largest
    per-machine totals, so checking the top-k set is exact.
    """
    C = prep.cfg.C
    cuts = []
    for k in range(1, prep.m + 1):
        beta = prep.beta(k)
        totals = (beta * x.x).sum(axis=1)
        order = np.argsort(-totals, kind="stable")[:k]
        if totals[order].sum() > C * k + FEAS_TOL:
            K = sorted(int(i) for i in order)
            coeffs = {x_name(i, j): beta[i, j] for i in K for j in range(prep.n)}
            cuts.append(Constraint(coeffs, "<=", C * k, f"linf[k={k},K={K}]"))
    return cuts


@dataclass(frozen=True)
class ReducedParams:
    v_bar: tuple[int, ...]
    l_bar: tuple[int, ...]
    I: tuple[int, ...]

    def as_dict(self) -> dict:
        return {"v_bar": list(self.v_bar), "l_bar": list(self.l_bar), "I": list(self.I)}


def compute_v_bar(xbar: FractionalAssignment, prep: Prepared) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Largest grid scale per machine whose capped L-function load is <= 2.

    Returns ``(v_bar, I)``; machines with no such scale get v_min and are left
    out of I.
    """
    grid = prep.grid
    v_bar, I = [], []
    for i in range(prep.m):
        load = lambda k: float(np.dot(prep.nu_hat(grid[k])[i], xbar.x[i]))  # noqa: E731
        # load is nondecreasing along the grid: find the last k with load <= 2
        lo, hi = -1, len(grid)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if load(mid) <= 2.0:
                lo = mid
            else:
                hi = mid
        if lo < 0:
            v_bar.append(grid[0])
        else:
            v_bar.append(grid[lo])
            I.append(i)
    return tuple(v_bar), tuple(I)


def compute_l_bar(xbar: FractionalAssignment, prep: Prepared) -> tuple[int, ...]:
    """Largest ell in [m] per machine whose effective-size load is <= C."""
    C = prep.cfg.C
    out = []
    for i in range(prep.m):
        load = lambda ell: float(np.dot(prep.beta(ell)[i], xbar.x[i]))  # noqa: E731
        if load(1) > C + FEAS_TOL:
            raise InfeasibleError(f"machine {i}: effective-size load at ell=1 exceeds C; x is not LP-feasible")
        lo, hi = 1, prep.m + 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if load(mid) <= C + FEAS_TOL:
                lo = mid
            else:
                hi = mid
        out.append(lo)
    return tuple(out)


def reduced_params(xbar: FractionalAssignment, prep: Prepared) -> ReducedParams:
    v_bar, I = compute_v_bar(xbar, prep)
    return ReducedParams(v_bar, compute_l_bar(xbar, prep), I)


def _reduced_rows(prep: Prepared, params: ReducedParams):
    """Disaggregated reduced-LP rows as (name, coeff matrix, rhs)."""
    m, T = prep.m, prep.T
    rows = [("exceptional", prep.exceptional_mean, 2.0 * T)]
    for i in params.I:
        coeff = np.zeros((m, prep.n))
        coeff[i] = prep.nu_hat(params.v_bar[i])[i]
        rows.append((f"scale[{i}]", coeff, 2.0))
    for i in range(m):
        coeff = np.zeros((m, prep.n))
        coeff[i] = prep.beta(params.l_bar[i])[i]
        rows.append((f"linf[{i}]", coeff, prep.cfg.beta_rhs))
    rows.append(("coarse", prep.coarse, prep.coarse_rhs))
    return rows


def build_reduced_lp(prep: Prepared, params: ReducedParams) -> LinearProgram:
    m, n = prep.m, prep.n
    lp = LinearProgram(f"reduced(T={prep.T:.6g})")
    for i in range(m):
        for j in range(n):
            lp.add_variable(x_name(i, j), 0.0, 1.0)
    for name, coeff, rhs in _reduced_rows(prep, params):
        nz = np.argwhere(coeff != 0)
        lp.add_constraint({x_name(int(i), int(j)): coeff[i, j] for i, j in nz}, "<=", rhs, name)
    _assignment_rows(lp, m, n)
    lp.set_objective({x_name(i, j): prep.cost[i, j] for i in range(m) for j in range(n)}, "minimize")
    return lp


def merge_to_gap(prep: Prepared, params: ReducedParams) -> GapInstance:
    """Fold the two cost rows into one (budget 2) and, per machine, the
    L-function and effective-size rows into one time row."""
    m = prep.m
    beta_rhs = prep.cfg.beta_rhs
    a = np.zeros((m, prep.n))
    A = np.ones(m)
    in_I = set(params.I)
    for i in range(m):
        a[i] = prep.beta(params.l_bar[i])[i] / beta_rhs
        if i in in_I:
            a[i] += 0.5 * prep.nu_hat(params.v_bar[i])[i]
            A[i] = 2.0
    return GapInstance(a=a, b=prep.cost.copy(), A=A, B=2.0)


def greedy_p1(inst: LbInstance) -> IntegralAssignment:
    """Each job to the machine with the smallest expected size (lowest index on ties)."""
    return IntegralAssignment(tuple(int(i) for i in np.argmin(inst.means(), axis=0)))


@dataclass
class SolveReport:
    p: float
    final_T: float | None
    assignment: list[int]
    norm: NormValue
    bracket: dict = field(default_factory=dict)
    probes: list[dict] = field(default_factory=list)
    non_monotone: bool = False
    params: ReducedParams | None = None
    audit: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    lp_stats: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "p": "inf" if math.isinf(self.p) else self.p,
            "final_T": self.final_T,
            "assignment": list(self.assignment),
            "norm": self.norm.as_dict(),
            "bracket": self.bracket,
            "probes": self.probes,
            "non_monotone": self.non_monotone,
            "params": self.params.as_dict() if self.params else None,
            "audit": self.audit,
            "checks": self.checks,
            "lp_stats": self.lp_stats,
            "timing": self.timing,
            "config": self.config,
        }


def lower_bound(inst: LbInstance, p: float) -> float:
    """max(max_j min_i E Y_ij, m^(1/p - 1) sum_j min_i E Y_ij) <= OPT."""
    mins = inst.means().min(axis=0)
    return max(float(mins.max()), inst.m ** (1.0 / p - 1.0) * float(mins.sum()))


def starting_lp_feasible(inst: LbInstance, p: float, T: float, cfg: SolverConfig):
    """Solve the starting LP at ``T`` with separation; returns (solution, prep)."""
    lp, oracle, prep = build_starting_lp(inst, p, T, cfg)
    sol = solve_with_separation(lp, oracle, cfg.max_rounds)
    if sol.status is LpStatus.ROUND_LIMIT:
        raise LimitError(f"separation hit the round limit ({cfg.max_rounds}) at T={T}")
    if sol.status is LpStatus.ITERATION_LIMIT:
        raise LimitError(f"simplex hit the pivot limit at T={T}")
    return sol, prep


def _evaluate(inst, machine_of, p, cfg) -> NormValue:
    return evaluate_assignment(inst, machine_of, p, cap=cfg.outcome_cap, mc_samples=cfg.mc_samples, seed=cfg.seed)


def solve(inst: LbInstance, p: float, cfg: SolverConfig | None = None) -> tuple[IntegralAssignment, SolveReport]:
    cfg = cfg or SolverConfig()
    p = check_p(p)
    t0 = time.perf_counter()
    greedy = greedy_p1(inst)
    if p == 1.0:
        norm = _evaluate(inst, greedy.machine_of, p, cfg)
        return greedy, SolveReport(p, None, list(greedy.machine_of), norm, config=cfg.as_dict(),
                                   timing={"total_s": time.perf_counter() - t0})
    upper = _evaluate(inst, greedy.machine_of, p, cfg).value
    lower = lower_bound(inst, p)
    report = SolveReport(p, None, [], NormValue("exact", 0.0), config=cfg.as_dict())
    report.bracket = {"initial_lower": lower, "initial_upper": upper, "doublings": 0}
    if upper <= 0:
        report.assignment = list(greedy.machine_of)
        report.norm = _evaluate(inst, greedy.machine_of, p, cfg)
        report.checks["degenerate"] = "all jobs have a zero-size machine"
        report.timing = {"total_s": time.perf_counter() - t0}
        return greedy, report

    cache: dict[float, tuple[LpSolution, Prepared]] = {}

    def feasible(T: float) -> bool:
        sol, prep = starting_lp_feasible(inst, p, T, cfg)
        cache[T] = (sol, prep)
        report.probes.append({"T": T, "feasible": sol.optimal, "rounds": sol.rounds, "cuts": len(sol.added_constraints)})
        return sol.optimal

    U = upper
    while not feasible(U):
        if report.bracket["doublings"] >= cfg.max_bracket_doublings:
            raise InfeasibleError(
                f"starting LP infeasible at every tried upper bracket up to T={U:.6g} "
                f"(greedy norm {upper:.6g}, lower bound {lower:.6g})"
            )
        lower = max(lower, U)
        U *= 2.0
        report.bracket["doublings"] += 1
    L = min(lower, U)
    for _ in range(cfg.max_bisection_iters):
        if U <= L * (1.0 + cfg.bisection_rel_tol):
            break
        T = math.sqrt(L * U)
        if feasible(T):
            U = T
        else:
            L = T
    feas = [pr["T"] for pr in report.probes if pr["feasible"]]
    infeas = [pr["T"] for pr in report.probes if not pr["feasible"]]
    report.non_monotone = bool(feas and infeas and min(feas) < max(infeas))
    report.bracket.update(final_lower=L, final_upper=U)
    T = U
    report.final_T = T
    sol, prep = cache[T]
    xbar = FractionalAssignment(_x_matrix(sol.values, inst.m, inst.n))
    params = reduced_params(xbar, prep)
    report.params = params
    reduced = build_reduced_lp(prep, params)
    xbar_violation = reduced.max_violation(sol.values)
    red = solve_lp(reduced)
    x_frac = _x_matrix(red.values, inst.m, inst.n) if red.optimal else xbar.x
    gap = merge_to_gap(prep, params)
    x_int = round_st(gap, x_frac)
    parts = {name: (coeff, rhs) for name, coeff, rhs in _reduced_rows(prep, params)}
    gap_audit = verify_gap_guarantees(gap, x_frac, x_int, parts)
    merged = {"cost": gap_audit.cost / gap.B}
    for i in range(inst.m):
        merged[f"time[{i}]"] = float(gap_audit.loads[i] / gap.A[i])
    report.audit = {
        "merged": merged,
        "disaggregated": gap_audit.factors,
        "max_merged": max(merged.values()),
        "max_disaggregated": max(gap_audit.factors.values()),
        "gap_guarantees": gap_audit.ok,
    }
    inv_v = sum(1.0 / v for v in params.v_bar)
    counts = {ell: sum(1 for l in params.l_bar if l == ell) for ell in range(1, inst.m + 1)}
    exc_l1 = float((prep.exceptional_mean * x_int.matrix(inst.m)).sum())
    report.checks = {
        "sum_inv_v_bar": inv_v,
        "sum_inv_v_bar_ok": inv_v <= 5.0,
        "l_bar_counts_ok": all(c <= ell for ell, c in counts.items()),
        "xbar_reduced_violation": xbar_violation,
        "xbar_reduced_feasible": xbar_violation <= REDUCED_FEAS_TOL,
        "exceptional_l1": exc_l1,
        "exceptional_factor": exc_l1 / (2.0 * T),
    }
    report.lp_stats = {
        "starting_rows": len(build_starting_lp(inst, p, T, cfg, prep)[0].constraints) + len(sol.added_constraints),
        "cuts": len(sol.added_constraints),
        "reduced_status": red.status.value,
    }
    report.assignment = list(x_int.machine_of)
    report.norm = _evaluate(inst, x_int.machine_of, p, cfg)
    report.timing = {"total_s": time.perf_counter() - t0}
    return x_int, report
