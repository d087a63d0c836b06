"""Self-contained MILP solving: simplex LP relaxations, branch and bound,
and a brute-force unit-commitment oracle for tiny instances."""

from .bnb import branch_and_bound, highs_milp, solve_milp
from .brute import BruteForceResult, brute_force_uc
from .core import (
    GAP_LIMIT,
    INFEASIBLE,
    NODE_LIMIT,
    OPTIMAL,
    TIME_LIMIT,
    SolveOptions,
    SolveResult,
    SolverError,
    lp_relaxation,
    solve_lp,
)
from .mps import read_mps, write_mps

__all__ = [
    "BruteForceResult",
    "GAP_LIMIT",
    "INFEASIBLE",
    "NODE_LIMIT",
    "OPTIMAL",
    "SolveOptions",
    "SolveResult",
    "SolverError",
    "TIME_LIMIT",
    "branch_and_bound",
    "brute_force_uc",
    "highs_milp",
    "lp_relaxation",
    "read_mps",
    "solve_lp",
    "solve_milp",
    "write_mps",
]
