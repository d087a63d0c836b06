"""Solver options/results and the LP relaxation entry point."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..problem import MilpProblem
from .simplex import NumericalError, Unbounded, simplex

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
GAP_LIMIT = "gap_limit"
NODE_LIMIT = "node_limit"
TIME_LIMIT = "time_limit"


@dataclass(frozen=True)
class SolveOptions:
    abs_gap: float = 1e-4
    rel_gap: float = 1e-6
    node_limit: int = 1_000_000
    time_limit: float | None = None
    feas_tol: float = 1e-6
    int_tol: float = 1e-6
    # "bnb": in-repo branch and bound; "highs": scipy's HiGHS MILP
    backend: str = "highs"
    # LP engine used by the in-repo branch and bound: "simplex" or "highs"
    lp_engine: str = "simplex"

    def __post_init__(self):
        for name in ("abs_gap", "rel_gap", "feas_tol", "int_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.backend not in ("bnb", "highs"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.lp_engine not in ("simplex", "highs"):
            raise ValueError(f"unknown lp_engine {self.lp_engine!r}")

    def gap_tol(self, objective: float) -> float:
        return max(self.abs_gap, self.rel_gap * abs(objective))


@dataclass
class SolveResult:
    status: str
    objective: float = math.nan
    values: np.ndarray | None = None
    bound: float = -math.inf
    nodes: int = 0
    bound_history: list[float] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


class SolverError(RuntimeError):
    """Numerical failure or an unbounded relaxation (an encoding bug here)."""


def _standard_form(problem: MilpProblem, lb, ub):
    """Shifted equality form ``M z = b``, ``0 <= z <= U`` with row slacks."""
    A = problem.matrix().toarray()
    lo, hi = problem.row_bounds()
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if not (np.all(np.isfinite(lb)) and np.all(np.isfinite(ub))):
        raise SolverError("all variables need finite bounds")
    m, n = A.shape
    cols, U, rhs = [A], [ub - lb], np.zeros(m)
    base = A @ lb
    slack_cols = []
    slack_U = []
    for i in range(m):
        if lo[i] == hi[i]:
            rhs[i] = lo[i] - base[i]
        elif np.isfinite(hi[i]) and not np.isfinite(lo[i]):
            rhs[i] = hi[i] - base[i]
            slack_cols.append((i, 1.0))
            slack_U.append(np.inf)
        elif np.isfinite(lo[i]) and not np.isfinite(hi[i]):
            rhs[i] = lo[i] - base[i]
            slack_cols.append((i, -1.0))
            slack_U.append(np.inf)
        else:
            rhs[i] = lo[i] - base[i]
            slack_cols.append((i, -1.0))
            slack_U.append(hi[i] - lo[i])
    S = np.zeros((m, len(slack_cols)))
    for k, (i, s) in enumerate(slack_cols):
        S[i, k] = s
    M = np.hstack(cols + [S])
    U = np.concatenate(U + [np.array(slack_U)])
    return M, rhs, U, n


def _lp_simplex(problem: MilpProblem, lb, ub):
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if np.any(lb > ub + 1e-12):
        return INFEASIBLE, None
    M, b, U, n = _standard_form(problem, lb, ub)
    c = np.concatenate([np.asarray(problem.obj, dtype=float), np.zeros(M.shape[1] - n)])
    try:
        status, z, _ = simplex(c, M, b, U)
    except Unbounded as exc:
        raise SolverError(str(exc)) from None
    except NumericalError as exc:
        cond = np.linalg.cond(M @ M.T) if M.size else 0.0
        raise SolverError(f"{exc} (cond(M M^T) = {cond:.3g})") from None
    if status != OPTIMAL:
        return INFEASIBLE, None
    x = np.clip(lb + z[:n], lb, ub)
    return OPTIMAL, x


def _lp_highs(problem: MilpProblem, lb, ub):
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if np.any(lb > ub + 1e-12):
        return INFEASIBLE, None
    A = problem.matrix()
    lo, hi = problem.row_bounds()
    eq = lo == hi
    A_ub = []
    b_ub = []
    if np.any(np.isfinite(hi) & ~eq):
        sel = np.isfinite(hi) & ~eq
        A_ub.append(A[sel])
        b_ub.append(hi[sel])
    if np.any(np.isfinite(lo) & ~eq):
        sel = np.isfinite(lo) & ~eq
        A_ub.append(-A[sel])
        b_ub.append(-lo[sel])
    res = linprog(
        np.asarray(problem.obj, dtype=float),
        A_ub=sp.vstack(A_ub) if A_ub else None,
        b_ub=np.concatenate(b_ub) if b_ub else None,
        A_eq=A[eq] if eq.any() else None,
        b_eq=lo[eq] if eq.any() else None,
        bounds=np.column_stack([lb, ub]),
        method="highs-ds",
    )
    if res.status == 2:
        return INFEASIBLE, None
    if res.status != 0:
        raise SolverError(f"LP failed: {res.message}")
    return OPTIMAL, np.clip(res.x, lb, ub)


def lp_relaxation(problem: MilpProblem, lb=None, ub=None, engine: str = "simplex"):
    lb = problem.lb if lb is None else lb
    ub = problem.ub if ub is None else ub
    if engine == "simplex":
        return _lp_simplex(problem, lb, ub)
    return _lp_highs(problem, lb, ub)


def solve_lp(problem: MilpProblem, opts: SolveOptions | None = None) -> SolveResult:
    """Optimal vertex of the LP relaxation (integrality ignored)."""
    opts = opts or SolveOptions()
    status, x = lp_relaxation(problem, engine=opts.lp_engine)
    if status != OPTIMAL:
        return SolveResult(INFEASIBLE, nodes=1)
    viol = problem.violations(x, opts.feas_tol)
    if viol:
        raise SolverError(f"LP solution violates {viol[0][0]} by {viol[0][1]:.3g}")
    obj = problem.objective_value(x)
    return SolveResult(OPTIMAL, obj, x, obj, 1, [obj])
