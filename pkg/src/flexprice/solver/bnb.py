"""Branch and bound over binary variables, plus the HiGHS MILP backend."""

from __future__ import annotations

import heapq
import math
import time

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, milp

from ..problem import MilpProblem
from .core import (
    INFEASIBLE,
    NODE_LIMIT,
    OPTIMAL,
    TIME_LIMIT,
    SolveOptions,
    SolveResult,
    SolverError,
    lp_relaxation,
)


def _most_fractional(x: np.ndarray, binaries: np.ndarray, int_tol: float) -> int:
    """Index of the most fractional binary (lowest index on ties), -1 if none."""
    frac = np.abs(x[binaries] - np.round(x[binaries]))
    if frac.size == 0 or frac.max() <= int_tol:
        return -1
    dist = np.minimum(x[binaries] - np.floor(x[binaries]), np.ceil(x[binaries]) - x[binaries])
    return int(binaries[int(np.argmax(dist))])


def branch_and_bound(problem: MilpProblem, opts: SolveOptions) -> SolveResult:
    """Best-first search with depth-first dives toward incumbents.

    A popped node is followed down the child nearest its LP value; the other
    child is queued with the parent's bound. The branching variable is the
    most fractional binary.
    """
    t0 = time.perf_counter()
    binaries = np.flatnonzero(problem.binary)
    lb0 = np.array(problem.lb, dtype=float)
    ub0 = np.array(problem.ub, dtype=float)

    incumbent, inc_x = math.inf, None
    nodes = 0
    seq = 0
    heap: list = [(-math.inf, seq, lb0, ub0)]
    history: list[float] = []
    bound = -math.inf
    status = OPTIMAL

    def record(b):
        nonlocal bound
        bound = max(bound, b)
        history.append(bound)

    exhausted = True
    while heap:
        node_bound, _, lb, ub = heapq.heappop(heap)
        record(min(node_bound, incumbent))
        if inc_x is not None and node_bound >= incumbent - opts.gap_tol(incumbent):
            exhausted = False  # best open node cannot beat the incumbent
            break
        while True:  # dive
            if nodes >= opts.node_limit:
                status = NODE_LIMIT
                break
            if opts.time_limit is not None and time.perf_counter() - t0 > opts.time_limit:
                status = TIME_LIMIT
                break
            nodes += 1
            st, x = lp_relaxation(problem, lb, ub, engine=opts.lp_engine)
            if st != OPTIMAL:
                break
            obj = problem.objective_value(x)
            if inc_x is not None and obj >= incumbent - opts.gap_tol(incumbent):
                break
            j = _most_fractional(x, binaries, opts.int_tol)
            if j < 0:
                xr = x.copy()
                xr[binaries] = np.round(xr[binaries])
                if problem.violations(xr, opts.feas_tol):
                    xr = x
                incumbent, inc_x = problem.objective_value(xr), xr
                break
            down_ub = ub.copy()
            down_ub[j] = 0.0
            up_lb = lb.copy()
            up_lb[j] = 1.0
            seq += 1
            if x[j] >= 0.5:
                heapq.heappush(heap, (obj, seq, lb, down_ub))
                lb = up_lb
            else:
                heapq.heappush(heap, (obj, seq, up_lb, ub))
                ub = down_ub
        if status != OPTIMAL:
            exhausted = False
            break
        if heap:
            record(min(heap[0][0], incumbent))
            if inc_x is not None and incumbent - bound <= opts.gap_tol(incumbent):
                exhausted = False
                break

    if inc_x is None:
        if status == OPTIMAL:
            return SolveResult(INFEASIBLE, nodes=nodes, bound_history=history)
        return SolveResult(status, bound=bound, nodes=nodes, bound_history=history)
    if exhausted:
        record(incumbent)
    return SolveResult(status, incumbent, inc_x, min(bound, incumbent), nodes, history)


def highs_milp(problem: MilpProblem, opts: SolveOptions) -> SolveResult:
    A = problem.matrix()
    lo, hi = problem.row_bounds()
    options = {"mip_rel_gap": opts.rel_gap, "presolve": True, "disp": False}
    if opts.time_limit is not None:
        options["time_limit"] = opts.time_limit
    if opts.node_limit < 1_000_000:
        options["node_limit"] = opts.node_limit
    res = milp(
        c=np.asarray(problem.obj, dtype=float),
        constraints=[LinearConstraint(sp.csr_matrix(A), lo, hi)] if problem.n_rows else None,
        integrality=np.asarray(problem.binary, dtype=int),
        bounds=Bounds(np.asarray(problem.lb), np.asarray(problem.ub)),
        options=options,
    )
    if res.status == 2:
        return SolveResult(INFEASIBLE, nodes=int(getattr(res, "mip_node_count", 0) or 0))
    if res.x is None:
        if res.status == 1:
            return SolveResult(TIME_LIMIT if opts.time_limit else NODE_LIMIT)
        raise SolverError(f"HiGHS failed: {res.message}")
    x = np.array(res.x, dtype=float)
    bins = np.flatnonzero(problem.binary)
    x[bins] = np.round(x[bins])
    if problem.violations(x, opts.feas_tol):
        x = np.array(res.x, dtype=float)
    obj = problem.objective_value(x)
    dual = getattr(res, "mip_dual_bound", None)
    bound = obj if dual is None or not np.isfinite(dual) else min(float(dual) + problem.constant, obj)
    status = OPTIMAL if res.status == 0 else (TIME_LIMIT if opts.time_limit else NODE_LIMIT)
    return SolveResult(status, obj, x, bound, int(getattr(res, "mip_node_count", 0) or 0), [bound])


def solve_milp(problem: MilpProblem, opts: SolveOptions | None = None) -> SolveResult:
    """Solve a MILP whose integer variables are all binaries."""
    opts = opts or SolveOptions()
    bins = np.flatnonzero(problem.binary)
    if np.any(np.array(problem.lb)[bins] < 0) or np.any(np.array(problem.ub)[bins] > 1):
        raise ValueError("binary variables must be bounded in [0, 1]")
    if opts.backend == "highs":
        return highs_milp(problem, opts)
    return branch_and_bound(problem, opts)
