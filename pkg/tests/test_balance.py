import itertools
import json
import math

import numpy as np
import pytest

from stochlb.assignment import FractionalAssignment
from stochlb.balance import (
    Prepared,
    ReducedParams,
    SolverConfig,
    build_reduced_lp,
    build_starting_lp,
    compute_l_bar,
    compute_v_bar,
    greedy_p1,
    linf_separation,
    lower_bound,
    merge_to_gap,
    solve,
    starting_lp_feasible,
    v_grid,
    x_name,
)
from stochlb.dist import DiscreteDist
from stochlb.errors import InfeasibleError
from stochlb.evaluate import brute_force_opt
from stochlb.instance import LbInstance, random_instance
from stochlb.lp import solve_lp


def det_instance(sizes):
    """sizes[i][j] deterministic."""
    return LbInstance(tuple(tuple(DiscreteDist.point(v) for v in row) for row in sizes))


def zero_instance(m, n):
    return det_instance([[0.0] * n for _ in range(m)])


def x_values(x: np.ndarray) -> dict:
    return {x_name(i, j): float(x[i, j]) for i in range(x.shape[0]) for j in range(x.shape[1])}


class TestConfig:
    def test_defaults(self):
        cfg = SolverConfig()
        assert cfg.alpha == 0.1 and cfg.C == 8 and cfg.v_grid_ratio == 2

    @pytest.mark.parametrize("kw", [{"alpha": 0.3}, {"alpha": 1.0}, {"C": 0}, {"v_grid_ratio": 1}, {"coarse_part": "x"}])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SolverConfig(**kw)

    @pytest.mark.parametrize("p,expected", [(1.5, 100), (2.0, 100), (3.0, 1000), (2.5, 317)])
    def test_v_min(self, p, expected):
        assert SolverConfig().v_min(p) == expected

    def test_grid_collapses_for_small_m(self):
        assert v_grid(3, 2.0, SolverConfig()) == [100]

    def test_grid_large_m(self):
        assert v_grid(400, 2.0, SolverConfig()) == [100, 200, 400]
        assert v_grid(450, 2.0, SolverConfig()) == [100, 200, 400, 450]

    def test_from_dict_unknown_key(self):
        with pytest.raises(ValueError):
            SolverConfig.from_dict({"bogus": 1})


class TestGreedy:
    def test_single_machine(self):
        assert greedy_p1(det_instance([[1, 2, 3]])).machine_of == (0, 0, 0)

    def test_dominating_machine(self):
        assert greedy_p1(det_instance([[1, 1, 1], [2, 2, 2]])).machine_of == (0, 0, 0)

    def test_ties_lowest_index(self):
        assert greedy_p1(det_instance([[1, 2], [1, 1]])).machine_of == (0, 1)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force_p1(self, seed):
        inst = random_instance(3, 5, 3, seed)
        bf = brute_force_opt(inst, 1.0)
        g = greedy_p1(inst)
        assert sum(inst.means()[i, j] for j, i in enumerate(g.machine_of)) == pytest.approx(bf.value, rel=1e-12)


class TestStartingLp:
    def test_huge_T_all_slack(self):
        inst = det_instance([[1.0] * 4, [1.0] * 4])
        sol, _ = starting_lp_feasible(inst, 2.0, 1e6, SolverConfig())
        assert sol.optimal and not sol.added_constraints

    def test_exceptional_budget_infeasible(self):
        # one machine, job of size 10 > alpha*T: exceptional mass 10 > 2T
        inst = det_instance([[10.0]])
        sol, _ = starting_lp_feasible(inst, 2.0, 4.0, SolverConfig())
        assert not sol.optimal

    def test_structure(self):
        inst = random_instance(2, 3, 2, seed=1)
        lp, oracle, prep = build_starting_lp(inst, 2.0, 5.0, SolverConfig())
        names = [c.name for c in lp.constraints]
        assert "exceptional" in names and "coarse" in names and "scale-sum" in names
        assert sum(n.startswith("scale[v=") for n in names) == 2 * len(prep.grid)
        z = [v for v in lp.variables if v.name.startswith("z[")]
        assert all(v.lower == pytest.approx(-1 / 100) and v.upper == 3 for v in z)

    def test_full_coarse_moment_rejects_heavy_tail(self):
        # X = 10 w.p. q: OPT = 10q but E X^2 = 100q, so the untruncated
        # p-th moment budget (4T)^p fails at T = 1.05 OPT once q < 1/4.2^2
        d = DiscreteDist.bernoulli(0.05, 10.0)
        inst = LbInstance(((d,),))
        T = 1.05 * 0.5
        assert starting_lp_feasible(inst, 2.0, T, SolverConfig())[0].optimal
        assert not starting_lp_feasible(inst, 2.0, T, SolverConfig(coarse_part="full"))[0].optimal

    @pytest.mark.parametrize("seed", range(6))
    def test_feasible_slightly_above_opt(self, seed):
        rng = np.random.default_rng(seed)
        p = [1.5, 2.0, 4.0][seed % 3]
        inst = random_instance(int(rng.integers(2, 4)), int(rng.integers(4, 7)), 3, seed=seed)
        bf = brute_force_opt(inst, p)
        sol, _ = starting_lp_feasible(inst, p, 1.05 * bf.value, SolverConfig())
        assert sol.optimal


def _exhaustive_violations(x, prep, C):
    """For each k: the max subset sum over |K| = k, and whether it violates."""
    out = {}
    for k in range(1, prep.m + 1):
        totals = (prep.beta(k) * x).sum(axis=1)
        best = max(sum(totals[list(K)]) for K in itertools.combinations(range(prep.m), k))
        out[k] = (best, best > C * k + 1e-7)
    return out


class TestLinfSeparation:
    def test_zero_jobs(self):
        inst = zero_instance(3, 2)
        prep = Prepared(inst, 2.0, 1.0, SolverConfig())
        x = np.full((3, 2), 1 / 3)
        assert linf_separation(FractionalAssignment(x), prep) == []

    def test_single_machine(self):
        inst = det_instance([[0.5, 0.5]])
        prep = Prepared(inst, 2.0, 10.0, SolverConfig(C=0.05))
        cuts = linf_separation(FractionalAssignment(np.ones((1, 2))), prep)
        # beta_1(0.5/10) summed = 0.1 > C = 0.05
        assert len(cuts) == 1 and cuts[0].rhs == pytest.approx(0.05)

    @pytest.mark.parametrize("seed", range(8))
    def test_against_exhaustive_scan(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(2, 9))
        inst = random_instance(m, 4, 3, seed=seed)
        cfg = SolverConfig(C=float(rng.uniform(0.02, 0.3)))
        prep = Prepared(inst, 2.0, 20.0, cfg)
        x = rng.dirichlet(np.ones(m), size=4).T
        cuts = linf_separation(FractionalAssignment(x), prep)
        emitted = {c.rhs / cfg.C: c for c in cuts}
        scan = _exhaustive_violations(x, prep, cfg.C)
        for k, (best, violated) in scan.items():
            key = next((kk for kk in emitted if round(kk) == k), None)
            assert (key is not None) == violated
            if violated:
                assert emitted[key].lhs(x_values(x)) == pytest.approx(best)

    def test_terminal_point_passes_scan(self):
        inst = random_instance(4, 5, 2, seed=1)
        cfg = SolverConfig(C=0.02)
        lp, oracle, prep = build_starting_lp(inst, 2.0, 40.0, cfg)
        from stochlb.lp import solve_with_separation

        sol = solve_with_separation(lp, oracle)
        assert sol.optimal and sol.added_constraints
        x = np.array([[sol.values[x_name(i, j)] for j in range(5)] for i in range(4)])
        assert not any(v for _, v in _exhaustive_violations(x, prep, cfg.C).values())


class TestReducedParams:
    def test_zero_jobs(self):
        inst = zero_instance(3, 2)
        prep = Prepared(inst, 2.0, 1.0, SolverConfig())
        xbar = FractionalAssignment(np.full((3, 2), 1 / 3))
        v_bar, I = compute_v_bar(xbar, prep)
        assert v_bar == (100, 100, 100) and I == (0, 1, 2)
        assert compute_l_bar(xbar, prep) == (3, 3, 3)

    def test_single_machine_l_bar(self):
        inst = det_instance([[0.1, 0.2]])
        prep = Prepared(inst, 2.0, 10.0, SolverConfig())
        assert compute_l_bar(FractionalAssignment(np.ones((1, 2))), prep) == (1,)

    def test_l_bar_raises_when_infeasible(self):
        inst = det_instance([[0.9, 0.9]])
        prep = Prepared(inst, 2.0, 10.0, SolverConfig(C=0.01))
        with pytest.raises(InfeasibleError):
            compute_l_bar(FractionalAssignment(np.ones((1, 2))), prep)

    def test_machine_outside_I(self):
        # a heavy machine whose capped mass already exceeds 2 at v_min
        # each job carries at most ln(1 + 0.1 * 10 / 44) ~ 0.0225 of capped mass
        inst = det_instance([[0.99] * 100, [0.0] * 100])
        prep = Prepared(inst, 2.0, 10.0, SolverConfig())
        x = np.vstack([np.ones(100), np.zeros(100)])
        assert prep.nu_hat(100)[0].sum() > 2
        v_bar, I = compute_v_bar(FractionalAssignment(x), prep)
        assert 0 not in I and v_bar[0] == 100 and 1 in I

    def test_large_m_reevaluation(self):
        # m = 400 makes the grid {100, 200, 400}; check maximality of v_bar and l_bar
        rng = np.random.default_rng(0)
        m, n = 400, 2
        inst = LbInstance(
            tuple(
                tuple(DiscreteDist.from_pairs([[0, 0.5], [float(rng.uniform(0, 1)), 0.5]]) for _ in range(n))
                for _ in range(m)
            )
        )
        prep = Prepared(inst, 2.0, 1.0, SolverConfig(C=0.02))
        assert prep.grid == [100, 200, 400]
        x = np.zeros((m, n))
        x[rng.integers(0, 20, size=n), np.arange(n)] = 1.0
        x = FractionalAssignment(x)
        v_bar, I = compute_v_bar(x, prep)
        for i in range(m):
            sums = [float(prep.nu_hat(v)[i] @ x.x[i]) for v in prep.grid]
            if i in I:
                k = prep.grid.index(v_bar[i])
                assert sums[k] <= 2 and (k == len(prep.grid) - 1 or sums[k + 1] > 2)
            else:
                assert sums[0] > 2
        l_bar = compute_l_bar(x, prep)
        for i in range(m):
            load = lambda ell: float(prep.beta(ell)[i] @ x.x[i])  # noqa: E731
            assert load(l_bar[i]) <= prep.cfg.C + 1e-7
            assert l_bar[i] == m or load(l_bar[i] + 1) > prep.cfg.C + 1e-7


class TestReducedLpAndMerge:
    def test_zero_jobs_whole_polytope(self):
        inst = zero_instance(2, 3)
        prep = Prepared(inst, 2.0, 1.0, SolverConfig())
        params = ReducedParams((100, 100), (2, 2), (0, 1))
        lp = build_reduced_lp(prep, params)
        assert lp.max_violation(x_values(np.full((2, 3), 0.5))) == 0
        gap = merge_to_gap(prep, params)
        assert not gap.a.any() and not gap.b.any()

    def test_single_job_hand_values(self):
        # T = 10, alpha T = 1, job 0.5: no exceptional part, grid {100}, eps = 1
        inst = det_instance([[0.5]])
        prep = Prepared(inst, 2.0, 10.0, SolverConfig())
        xbar = FractionalAssignment(np.ones((1, 1)))
        v_bar, I = compute_v_bar(xbar, prep)
        params = ReducedParams(v_bar, compute_l_bar(xbar, prep), I)
        gap = merge_to_gap(prep, params)
        assert params == ReducedParams((100,), (1,), (0,))
        assert gap.a[0, 0] == pytest.approx(0.5 * math.log(1 + 0.5 / 44) + 0.05 / 8, rel=1e-12)
        assert gap.b[0, 0] == pytest.approx(0.25 / 1600, rel=1e-12)
        assert gap.A.tolist() == [2.0] and gap.B == 2.0

    @pytest.mark.parametrize("seed", range(5))
    def test_xbar_feasible_and_max_a_bounded(self, seed):
        inst = random_instance(3, 5, 3, seed=seed)
        bf = brute_force_opt(inst, 2.0)
        sol, prep = starting_lp_feasible(inst, 2.0, 1.05 * bf.value, SolverConfig())
        xbar = FractionalAssignment(np.array([[sol.values[x_name(i, j)] for j in range(5)] for i in range(3)]))
        v_bar, I = compute_v_bar(xbar, prep)
        params = ReducedParams(v_bar, compute_l_bar(xbar, prep), I)
        assert build_reduced_lp(prep, params).max_violation(sol.values) <= 1e-6
        gap = merge_to_gap(prep, params)
        assert np.all(gap.a.max(axis=1) <= gap.A + 1e-12)
        assert solve_lp(build_reduced_lp(prep, params)).optimal


class TestSolve:
    def test_single_machine(self):
        inst = LbInstance(((DiscreteDist.bernoulli(0.5, 2.0), DiscreteDist.point(1.0)),))
        x, rep = solve(inst, 2.0)
        assert x.machine_of == (0, 0)
        assert rep.norm.value == pytest.approx(2.0)
        assert rep.final_T <= 2.0 * (1 + 0.05) + 1e-9 or rep.bracket["doublings"] > 0

    def test_p1_dispatches_to_greedy(self):
        inst = random_instance(2, 4, 2, seed=4)
        x, rep = solve(inst, 1.0)
        assert x == greedy_p1(inst) and rep.final_T is None

    def test_dominating_machine(self):
        inst = det_instance([[1.0] * 4, [50.0] * 4])
        x, rep = solve(inst, 2.0)
        bf = brute_force_opt(inst, 2.0)
        assert rep.norm.value <= SolverConfig().ratio_guard * bf.value

    def test_report_is_json(self):
        inst = random_instance(2, 4, 2, seed=8)
        _, rep = solve(inst, 2.0)
        doc = json.loads(json.dumps(rep.as_dict()))
        assert set(doc) >= {"final_T", "assignment", "norm", "audit", "params", "config", "timing"}

    def test_bracket_failure(self):
        # six unit jobs, each cheapest on its own machine (greedy balances them),
        # at p = 4: greedy norm ~ 48^(1/4) ~ 2.63, and the exceptional budget
        # 2T < 6 rejects every T below 3
        inst = det_instance([[1.0 if j % 3 == i else 1.001 for j in range(6)] for i in range(3)])
        with pytest.raises(InfeasibleError):
            solve(inst, 4.0, SolverConfig(max_bracket_doublings=0))
        _, rep = solve(inst, 4.0)
        assert rep.bracket["doublings"] >= 1

    def test_lower_bound_valid(self):
        for seed in range(5):
            inst = random_instance(3, 5, 3, seed)
            assert lower_bound(inst, 2.0) <= brute_force_opt(inst, 2.0).value + 1e-9

    @pytest.mark.parametrize("seed", range(6))
    def test_suite_invariants(self, seed):
        rng = np.random.default_rng(50 + seed)
        p = [1.5, 2.0, 4.0][seed % 3]
        inst = random_instance(int(rng.integers(2, 4)), int(rng.integers(4, 7)), 3, seed=50 + seed)
        _, rep = solve(inst, p)
        assert rep.checks["sum_inv_v_bar_ok"] and rep.checks["l_bar_counts_ok"]
        assert rep.checks["xbar_reduced_feasible"]
        assert rep.audit["max_merged"] <= 2 + 1e-6
        assert rep.audit["max_disaggregated"] <= 4 + 1e-6
        assert rep.norm.value <= 20 * brute_force_opt(inst, p).value
