"""Dense bounded-variable primal simplex with a cutting-plane driver.

Small and auditable rather than fast: every iteration refactorises the basis
from scratch, so there is no accumulated drift to reason about. Rows are
scaled to unit max-coefficient before solving and all tolerances refer to
those normalised rows.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIVOT_TOL = 1e-10
MAX_PIVOTS = 10**6
RESIDUAL_TOL = 1e-6
DROP_TOL = 1e-12
MAX_ROUNDS = 200


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration-limit"
    ROUND_LIMIT = "round-limit"


class Sense(str, enum.Enum):
    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"
    FEASIBILITY = "feasibility"


RELATIONS = ("<=", "==", ">=")


@dataclass
class Constraint:
    coeffs: dict[str, float]
    relation: str
    rhs: float
    name: str = ""

    def __post_init__(self):
        if self.relation == "=":
            self.relation = "=="
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")
        if not math.isfinite(self.rhs) or not all(math.isfinite(v) for v in self.coeffs.values()):
            raise ValueError(f"constraint {self.name!r} has non-finite data")

    def lhs(self, values: Mapping[str, float]) -> float:
        return math.fsum(c * values[v] for v, c in self.coeffs.items())

    def violation(self, values: Mapping[str, float]) -> float:
        """Normalised violation (0 when satisfied)."""
        scale = max([abs(c) for c in self.coeffs.values()] + [1e-300])
        gap = (self.lhs(values) - self.rhs) / scale
        if self.relation == "<=":
            return max(gap, 0.0)
        if self.relation == ">=":
            return max(-gap, 0.0)
        return abs(gap)


@dataclass
class Variable:
    name: str
    lower: float = 0.0
    upper: float = math.inf


class LinearProgram:
    """Variables with bounds, linear constraints and a linear objective."""

    def __init__(self, name: str = "lp"):
        self.name = name
        self.variables: list[Variable] = []
        self._index: dict[str, int] = {}
        self.constraints: list[Constraint] = []
        self.objective: dict[str, float] = {}
        self.sense = Sense.FEASIBILITY

    def add_variable(self, name: str, lower: float = 0.0, upper: float = math.inf) -> str:
        if name in self._index:
            raise ValueError(f"duplicate variable {name!r}")
        if math.isnan(lower) or math.isnan(upper) or lower > upper:
            raise ValueError(f"bad bounds for {name!r}: [{lower}, {upper}]")
        self._index[name] = len(self.variables)
        self.variables.append(Variable(name, float(lower), float(upper)))
        return name

    def add_constraint(self, coeffs: Mapping[str, float], relation: str, rhs: float, name: str = "") -> Constraint:
        unknown = [v for v in coeffs if v not in self._index]
        if unknown:
            raise KeyError(f"unknown variables {unknown}")
        con = Constraint({k: float(v) for k, v in coeffs.items() if v != 0.0}, relation, float(rhs), name)
        self.constraints.append(con)
        return con

    def set_objective(self, coeffs: Mapping[str, float], sense: Sense | str = Sense.MINIMIZE) -> None:
        self.sense = Sense(sense)
        self.objective = {k: float(v) for k, v in coeffs.items()}

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def copy(self) -> "LinearProgram":
        other = LinearProgram(self.name)
        other.variables = [Variable(v.name, v.lower, v.upper) for v in self.variables]
        other._index = dict(self._index)
        other.constraints = [Constraint(dict(c.coeffs), c.relation, c.rhs, c.name) for c in self.constraints]
        other.objective = dict(self.objective)
        other.sense = self.sense
        return other

    def max_violation(self, values: Mapping[str, float]) -> float:
        worst = 0.0
        for v in self.variables:
            x = values[v.name]
            worst = max(worst, v.lower - x, x - v.upper)
        for c in self.constraints:
            worst = max(worst, c.violation(values))
        return worst

    def to_text(self) -> str:
        """Human-readable dump in an LP-file-like layout (debugging only)."""

        def expr(coeffs):
            if not coeffs:
                return "0"
            parts = []
            for k, v in coeffs.items():
                sign = "-" if v < 0 else "+"
                parts.append(f"{sign} {abs(v):.12g} {k}")
            s = " ".join(parts)
            return s[2:] if s.startswith("+ ") else s

        head = {"minimize": "Minimize", "maximize": "Maximize", "feasibility": "Minimize"}[self.sense.value]
        lines = [f"\\ {self.name}", head, f" obj: {expr(self.objective)}", "Subject To"]
        for k, c in enumerate(self.constraints):
            rel = {"<=": "<=", ">=": ">=", "==": "="}[c.relation]
            lines.append(f" {c.name or f'c{k}'}: {expr(c.coeffs)} {rel} {c.rhs:.12g}")
        lines.append("Bounds")
        for v in self.variables:
            lo = "-inf" if math.isinf(v.lower) else f"{v.lower:.12g}"
            hi = "+inf" if math.isinf(v.upper) else f"{v.upper:.12g}"
            lines.append(f" {lo} <= {v.name} <= {hi}")
        lines.append("End")
        return "\n".join(lines)


@dataclass
class LpSolution:
    status: LpStatus
    values: dict[str, float] = field(default_factory=dict)
    objective_value: float = math.nan
    iterations: int = 0
    max_violation: float = math.nan
    # separation bookkeeping
    rounds: int = 0
    added_constraints: list[Constraint] = field(default_factory=list)
    # debug-mode audits
    certificate: dict | None = None

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class _Simplex:
    """Bounded-variable revised simplex on ``min c x, A x = b, l <= x <= u``.

    Nonbasic variables sit at a finite bound; ``at_upper`` tracks which.
    """

    def __init__(self, A, b, c, lower, upper, max_pivots):
        self.A, self.b, self.c = A, b, c
        self.lower, self.upper = lower, upper
        self.max_pivots = max_pivots
        self.iterations = 0

    def run(self, basis, x, cost, bland_after):
        A, lower, upper = self.A, self.lower, self.upper
        r, n = A.shape
        stall = 0
        bland = False
        last_obj = math.inf
        nonbasic = np.ones(n, dtype=bool)
        nonbasic[basis] = False
        while True:
            if self.iterations >= self.max_pivots:
                return "iteration-limit", basis, x
            B = A[:, basis]
            rhs = self.b - A[:, nonbasic] @ x[nonbasic]
            try:
                x[basis] = np.linalg.solve(B, rhs)
                y = np.linalg.solve(B.T, cost[basis])
            except np.linalg.LinAlgError:
                return "singular", basis, x
            d = cost - A.T @ y
            at_upper = nonbasic & (x >= upper - 1e-12) & np.isfinite(upper)
            movable = nonbasic & (upper > lower)
            eligible = movable & (((~at_upper) & (d < -OPT_TOL)) | (at_upper & (d > OPT_TOL)))
            cand = np.flatnonzero(eligible)
            if cand.size == 0:
                self.duals, self.reduced = y, d
                return "optimal", basis, x
            j = int(cand[0]) if bland else int(cand[np.argmax(np.abs(d[cand]))])
            direction = -1.0 if at_upper[j] else 1.0
            w = np.linalg.solve(B, A[:, j])
            rate = -direction * w  # d x_B / dt
            t_best = upper[j] - lower[j]
            leave = -1
            leave_to_upper = False
            best_rate = 0.0
            for k, var in enumerate(basis):
                rk = rate[k]
                if rk < -PIVOT_TOL:
                    t = max(x[var] - lower[var], 0.0) / -rk
                    to_upper = False
                elif rk > PIVOT_TOL and math.isfinite(upper[var]):
                    t = max(upper[var] - x[var], 0.0) / rk
                    to_upper = True
                else:
                    continue
                if leave < 0:
                    take = t <= t_best
                elif t < t_best - 1e-12:
                    take = True
                elif t <= t_best + 1e-12:
                    take = var < basis[leave] if bland else abs(rk) > best_rate
                else:
                    take = False
                if take:
                    t_best, leave, leave_to_upper, best_rate = t, k, to_upper, abs(rk)
            if math.isinf(t_best):
                return "unbounded", basis, x
            self.iterations += 1
            x[j] += direction * t_best
            if leave < 0:
                # bound flip, basis unchanged
                x[j] = lower[j] if direction < 0 else upper[j]
            else:
                out = basis[leave]
                x[out] = upper[out] if leave_to_upper else lower[out]
                basis[leave] = j
                nonbasic[j] = False
                nonbasic[out] = True
            obj = float(cost @ x)
            if obj < last_obj - 1e-12:
                last_obj = obj
                stall = 0
            else:
                stall += 1
                if stall > bland_after:
                    bland = True


def _standard_form(lp: LinearProgram):
    """Rows normalised, slacks appended, free/upper-only variables shifted.

    Returns the standard data plus a recovery function to original values.
    """
    nv = len(lp.variables)
    cols: list[tuple[str, float, float, float, int]] = []  # (kind, lo, hi, sign, orig)
    col_of: list[list[tuple[int, float]]] = [[] for _ in range(nv)]
    offset = np.zeros(nv)
    for k, v in enumerate(lp.variables):
        if math.isfinite(v.lower):
            col_of[k].append((len(cols), 1.0))
            cols.append(("x", v.lower, v.upper, 1.0, k))
        elif math.isfinite(v.upper):
            col_of[k].append((len(cols), -1.0))
            cols.append(("x", -v.upper, math.inf, -1.0, k))
        else:
            col_of[k].append((len(cols), 1.0))
            cols.append(("x", 0.0, math.inf, 1.0, k))
            col_of[k].append((len(cols), -1.0))
            cols.append(("x", 0.0, math.inf, -1.0, k))
    rows = []
    b = []
    for con in lp.constraints:
        row = {}
        for name, coef in con.coeffs.items():
            var = lp.variables[lp._index[name]]
            # a term that cannot move the row by more than dust would blow up
            # the unit-max scaling below, so it is dropped
            if abs(coef) * (var.upper - var.lower) <= DROP_TOL * max(1.0, abs(con.rhs)):
                continue
            for col, sign in col_of[lp._index[name]]:
                row[col] = row.get(col, 0.0) + sign * coef
        scale = max(abs(c) for c in row.values()) if row else 1.0
        rows.append(({c: v / scale for c, v in row.items()}, con.relation))
        b.append(con.rhs / scale)
    n_struct = len(cols)
    for k, (row, rel) in enumerate(rows):
        if rel != "==":
            row[len(cols)] = 1.0 if rel == "<=" else -1.0
            cols.append(("s", 0.0, math.inf, 1.0, -1))
    A = np.zeros((len(rows), len(cols)))
    for k, (row, _) in enumerate(rows):
        for c, v in row.items():
            A[k, c] = v
    lower = np.array([c[1] for c in cols], dtype=float)
    upper = np.array([c[2] for c in cols], dtype=float)
    cost = np.zeros(len(cols))
    sign = -1.0 if lp.sense is Sense.MAXIMIZE else 1.0
    if lp.sense is not Sense.FEASIBILITY:
        for name, coef in lp.objective.items():
            for col, s in col_of[lp._index[name]]:
                cost[col] += sign * s * coef

    def recover(x):
        out = {}
        for k, v in enumerate(lp.variables):
            out[v.name] = float(sum(s * x[col] for col, s in col_of[k]))
        return out

    return A, np.array(b, dtype=float), cost, lower, upper, n_struct, recover


def solve_lp(lp: LinearProgram, *, max_pivots: int = MAX_PIVOTS, debug: bool = False) -> LpSolution:
    """Two-phase bounded simplex.

    With ``debug=True`` an optimal solution carries a dual-feasibility audit
    and an infeasible one a Farkas-type witness (see :func:`farkas_gap`).
    """
    A, b, cost, lower, upper, n_struct, recover = _standard_form(lp)
    r, n = A.shape
    if r == 0:
        if np.any((cost < 0) & ~np.isfinite(upper)):
            return LpSolution(LpStatus.UNBOUNDED)
        x = np.where(cost < 0, upper, lower)
        values = recover(x)
        return LpSolution(LpStatus.OPTIMAL, values, _objective(lp, values), 0, lp.max_violation(values))
    x = lower.copy()
    resid = b - A @ x
    art_sign = np.where(resid >= 0, 1.0, -1.0)
    A1 = np.hstack([A, np.diag(art_sign)])
    lo1 = np.concatenate([lower, np.zeros(r)])
    hi1 = np.concatenate([upper, np.full(r, math.inf)])
    x1 = np.concatenate([x, np.abs(resid)])
    basis = list(range(n, n + r))
    phase1_cost = np.concatenate([np.zeros(n), np.ones(r)])
    bland_after = 5 * (r + n)
    sim = _Simplex(A1, b, None, lo1, hi1, max_pivots)
    status, basis, x1 = sim.run(basis, x1, phase1_cost, bland_after)
    if status == "iteration-limit":
        return LpSolution(LpStatus.ITERATION_LIMIT, iterations=sim.iterations)
    if status == "singular":
        raise ArithmeticError("singular basis in phase 1")
    infeas = float(x1[n:].sum())
    if infeas > FEAS_TOL:
        sol = LpSolution(LpStatus.INFEASIBLE, iterations=sim.iterations)
        if debug:
            y = sim.duals
            sol.certificate = {"y": y.tolist(), "gap": farkas_gap(A, b, lower, upper, y)}
        return sol
    # phase 2: artificials pinned at zero
    hi1[n:] = 0.0
    x1[n:] = 0.0
    cost2 = np.concatenate([cost, np.zeros(r)])
    status, basis, x1 = sim.run(basis, x1, cost2, bland_after)
    if status == "iteration-limit":
        return LpSolution(LpStatus.ITERATION_LIMIT, iterations=sim.iterations)
    if status == "unbounded":
        return LpSolution(LpStatus.UNBOUNDED, iterations=sim.iterations)
    if status == "singular":
        raise ArithmeticError("singular basis in phase 2")
    values = recover(x1[:n])
    worst = _scaled_violation(lp, values)
    if worst > RESIDUAL_TOL:
        raise ArithmeticError(f"simplex returned a point violating a row by {worst:.3g} (scaled); ill-conditioned LP")
    sol = LpSolution(
        LpStatus.OPTIMAL, values, _objective(lp, values), sim.iterations, lp.max_violation(values)
    )
    if debug:
        d = sim.reduced
        nonbasic = np.ones(n + r, dtype=bool)
        nonbasic[basis] = False
        at_up = nonbasic & np.isfinite(hi1) & (x1 >= hi1 - 1e-12)
        at_lo = nonbasic & (x1 <= lo1 + 1e-12)
        bad = (at_lo & ~at_up & (d < -1e-7)) | (at_up & ~at_lo & (d > 1e-7))
        sol.certificate = {"dual_feasible": not bool(bad[: n].any()), "duals": sim.duals.tolist()}
    return sol


def _scaled_violation(lp: LinearProgram, values: Mapping[str, float]) -> float:
    """Largest constraint violation, each row measured relative to its own size."""
    worst = 0.0
    for con in lp.constraints:
        gap = con.lhs(values) - con.rhs
        gap = {"<=": max(gap, 0.0), ">=": max(-gap, 0.0)}.get(con.relation, abs(gap))
        size = max([1.0, abs(con.rhs)] + [abs(c * values[k]) for k, c in con.coeffs.items()])
        worst = max(worst, gap / size)
    return worst


def farkas_gap(A, b, lower, upper, y) -> float:
    """y.b - max_{lower<=x<=upper} y.A x; positive proves ``A x = b`` infeasible in the box."""
    g = np.asarray(y) @ A
    # rounding dust on unbounded columns would otherwise turn into +-inf
    g[np.abs(g) <= PIVOT_TOL * max(1.0, float(np.abs(y).max(initial=0.0)))] = 0.0
    best = np.zeros_like(g)
    pos, neg = g > 0, g < 0
    best[pos] = np.where(np.isfinite(upper[pos]), g[pos] * np.where(np.isfinite(upper[pos]), upper[pos], 0.0), math.inf)
    best[neg] = g[neg] * lower[neg]
    return float(np.asarray(y) @ b - best.sum())


def _objective(lp: LinearProgram, values: Mapping[str, float]) -> float:
    if lp.sense is Sense.FEASIBILITY:
        return 0.0
    return math.fsum(c * values[v] for v, c in lp.objective.items())


SeparationOracle = Callable[[LpSolution], Iterable[Constraint]]


def solve_with_separation(
    lp: LinearProgram,
    oracle: SeparationOracle,
    max_rounds: int = MAX_ROUNDS,
    **solve_kwargs,
) -> LpSolution:
    """Cutting-plane loop: solve, ask the oracle for violated cuts, add all, repeat.

    ``lp`` is extended in place. Cuts that the current point does not
    violate by more than the feasibility tolerance are ignored.
    """
    added: list[Constraint] = []
    for rounds in range(max_rounds + 1):
        sol = solve_lp(lp, **solve_kwargs)
        sol.rounds = rounds
        sol.added_constraints = added
        if not sol.optimal:
            return sol
        cuts = [c for c in oracle(sol) if c.violation(sol.values) > FEAS_TOL]
        if not cuts:
            return sol
        if rounds == max_rounds:
            break
        for c in cuts:
            lp.add_constraint(c.coeffs, c.relation, c.rhs, c.name)
            added.append(lp.constraints[-1])
    sol.status = LpStatus.ROUND_LIMIT
    return sol
