"""Stochastic lp load balancing on unrelated machines via L-functions."""
from ._kernels import BACKEND
from .assignment import FractionalAssignment, IntegralAssignment
from .balance import SolveReport, SolverConfig, greedy_p1, solve
from .dist import (
    DiscreteDist,
    capped_l_function,
    effective_size,
    expectation,
    l_function,
    raw_moment,
    scale,
    truncate_split,
)
from .evaluate import brute_force_opt, evaluate_assignment
from .gap import GapInstance, round_st, verify_gap_guarantees
from .instance import LbInstance, load_instance, random_instance
from .lp import LinearProgram, LpSolution, LpStatus, solve_lp, solve_with_separation
from .moments import (
    expected_lp_norm_exact,
    expected_lp_norm_mc,
    latala_bounds,
    solve_epsilon_star,
    sum_moment_exact,
)
from .subset import SelectionInstance, select

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DiscreteDist",
    "FractionalAssignment",
    "GapInstance",
    "IntegralAssignment",
    "LbInstance",
    "LinearProgram",
    "LpSolution",
    "LpStatus",
    "SelectionInstance",
    "SolveReport",
    "SolverConfig",
    "brute_force_opt",
    "capped_l_function",
    "effective_size",
    "evaluate_assignment",
    "expectation",
    "expected_lp_norm_exact",
    "expected_lp_norm_mc",
    "greedy_p1",
    "l_function",
    "latala_bounds",
    "load_instance",
    "random_instance",
    "raw_moment",
    "round_st",
    "scale",
    "select",
    "solve",
    "solve_epsilon_star",
    "solve_lp",
    "solve_with_separation",
    "sum_moment_exact",
    "truncate_split",
    "verify_gap_guarantees",
]
