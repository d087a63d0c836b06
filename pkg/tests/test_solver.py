import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from conftest import tiny_config, unit
from flexprice.problem import EQ, GE, LE, MilpProblem
from flexprice.solver import (
    INFEASIBLE,
    NODE_LIMIT,
    OPTIMAL,
    SolveOptions,
    brute_force_uc,
    read_mps,
    solve_lp,
    solve_milp,
    write_mps,
)
from flexprice.solver.brute import EnumerationLimitError, unit_patterns
from flexprice.ucopt import build_uc, decode
from oracles import textbook_simplex

BNB = SolveOptions(backend="bnb")


def _lp(c, A, b, ub=1e6):
    prob = MilpProblem()
    idx = [prob.add_var(f"x{j}", 0.0, ub, obj=float(c[j])) for j in range(len(c))]
    for i in range(len(b)):
        prob.add_row({idx[j]: float(A[i, j]) for j in range(len(c)) if A[i, j]}, LE, float(b[i]), f"r{i}")
    return prob


def _knapsack():
    prob = MilpProblem()
    x = [prob.add_var(f"x{i}", binary=True, obj=-v) for i, v in enumerate((5, 4, 3))]
    prob.add_row({x[0]: 4, x[1]: 3, x[2]: 2}, LE, 6, "weight")
    return prob


def _random_milp(rng, n=8, m=5):
    """Feasible by construction: rows are built around a random binary point."""
    prob = MilpProblem()
    xs = []
    for j in range(n):
        if j % 2 == 0:
            xs.append(prob.add_var(f"b{j}", binary=True, obj=float(rng.uniform(-5, 5))))
        else:
            xs.append(prob.add_var(f"y{j}", 0.0, 10.0, obj=float(rng.uniform(-5, 5))))
    point = np.array([rng.integers(0, 2) if j % 2 == 0 else rng.uniform(0, 10) for j in range(n)])
    for i in range(m):
        a = np.round(rng.uniform(-3, 3, n), 2)
        prob.add_row({xs[j]: float(a[j]) for j in range(n)}, LE, float(a @ point + rng.uniform(0, 2)), f"r{i}")
    return prob


# -- LP ---------------------------------------------------------------------------

@pytest.mark.parametrize("engine", ["simplex", "highs"])
def test_lp_bounds_example(engine):
    prob = MilpProblem()
    x = prob.add_var("x", 0.0, 100.0, obj=1.0)
    prob.add_row({x: 1.0}, GE, 3.0)
    prob.add_row({x: 1.0}, LE, 10.0)
    res = solve_lp(prob, SolveOptions(lp_engine=engine))
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(3.0) and res.values[0] == pytest.approx(3.0)


@pytest.mark.parametrize("engine", ["simplex", "highs"])
def test_lp_infeasible_pair(engine):
    prob = MilpProblem()
    x = prob.add_var("x", 0.0, 100.0, obj=1.0)
    prob.add_row({x: 1.0}, GE, 5.0)
    prob.add_row({x: 1.0}, LE, 4.0)
    assert solve_lp(prob, SolveOptions(lp_engine=engine)).status == INFEASIBLE


@pytest.mark.parametrize("seed", range(12))
def test_random_dense_lp_matches_textbook(seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.1, 1.0, (20, 20))
    b = rng.uniform(1.0, 10.0, 20)
    c = -rng.uniform(0.0, 1.0, 20)
    st_ref, x_ref, obj_ref = textbook_simplex(c, A, b)
    assert st_ref == "optimal"
    res = solve_lp(_lp(c, A, b))
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(obj_ref, abs=1e-6)
    assert np.all(A @ res.values <= b + 1e-6)


@pytest.mark.parametrize("seed", range(8))
def test_random_mixed_lp_matches_highs(seed):
    # equality and >= rows plus finite upper bounds exercise the bounded simplex
    rng = np.random.default_rng(100 + seed)
    n, m = 12, 8
    x0 = rng.uniform(0, 5, n)
    A = rng.uniform(-2, 2, (m, n))
    prob = MilpProblem()
    idx = [prob.add_var(f"x{j}", 0.0, 5.0, obj=float(rng.uniform(-1, 1))) for j in range(n)]
    senses = [EQ, LE, GE] * 3
    for i in range(m):
        rhs = float(A[i] @ x0) + {EQ: 0.0, LE: 1.0, GE: -1.0}[senses[i]]
        prob.add_row({idx[j]: float(A[i, j]) for j in range(n)}, senses[i], rhs)
    ref = linprog(prob.obj, A_ub=np.vstack([A[i] * (1 if senses[i] == LE else -1) for i in range(m) if senses[i] != EQ]),
                  b_ub=[r.rhs * (1 if r.sense == LE else -1) for r in prob.rows if r.sense != EQ],
                  A_eq=np.array([A[i] for i in range(m) if senses[i] == EQ]),
                  b_eq=[r.rhs for r in prob.rows if r.sense == EQ], bounds=[(0, 5)] * n, method="highs")
    res = solve_lp(prob)
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(ref.fun, abs=1e-6)


# -- MILP ----------------------------------------------------------------------

def _knapsack_by_enumeration():
    best = max((5 * a + 4 * b + 3 * c, (a, b, c)) for a, b, c in itertools.product((0, 1), repeat=3)
               if 4 * a + 3 * b + 2 * c <= 6)
    return best


@pytest.mark.parametrize("backend", ["bnb", "highs"])
def test_knapsack(backend):
    value, point = _knapsack_by_enumeration()
    assert (value, point) == (8, (1, 0, 1))  # x2 = x3 = 1 is feasible but only worth 7
    res = solve_milp(_knapsack(), SolveOptions(backend=backend))
    assert res.status == OPTIMAL
    assert -res.objective == pytest.approx(value)
    assert np.allclose(res.values, point)


def test_integral_relaxation_one_node():
    prob = MilpProblem()
    x = prob.add_var("x", binary=True, obj=1.0)
    prob.add_row({x: 1.0}, GE, 1.0)
    res = solve_milp(prob, BNB)
    assert res.status == OPTIMAL and res.nodes == 1 and res.values[0] == 1.0


def test_infeasible_milp():
    prob = MilpProblem()
    x = prob.add_var("x", binary=True)
    y = prob.add_var("y", binary=True)
    prob.add_row({x: 1.0, y: 1.0}, EQ, 1.5)
    assert solve_milp(prob, BNB).status == INFEASIBLE
    assert solve_milp(prob).status == INFEASIBLE


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_bnb_matches_highs_on_random_milps(seed):
    prob = _random_milp(np.random.default_rng(seed))
    ours = solve_milp(prob, BNB)
    ref = solve_milp(prob, SolveOptions())
    assert ours.status == ref.status == OPTIMAL
    assert ours.objective == pytest.approx(ref.objective, abs=1e-4)
    assert not prob.violations(ours.values, 1e-6)
    assert not prob.integrality_violations(ours.values)


@pytest.mark.parametrize("seed", range(10))
def test_bound_history_monotone_and_valid(seed):
    prob = _random_milp(np.random.default_rng(seed), n=14, m=7)
    res = solve_milp(prob, BNB)
    h = np.array(res.bound_history)
    assert len(h) >= 1 and np.all(np.diff(h) >= -1e-12)
    assert res.bound <= res.objective + 1e-9  # weak duality
    assert res.objective - res.bound <= BNB.gap_tol(res.objective) + 1e-9


def test_deterministic():
    prob = _random_milp(np.random.default_rng(3), n=14, m=7)
    a, b = solve_milp(prob, BNB), solve_milp(prob.copy(), BNB)
    assert a.status == b.status and a.nodes == b.nodes
    assert a.objective == b.objective and np.array_equal(a.values, b.values)


def test_node_limit_reports_partial():
    prob = _random_milp(np.random.default_rng(5), n=20, m=8)
    res = solve_milp(prob, SolveOptions(backend="bnb", node_limit=2))
    assert res.status in (NODE_LIMIT, OPTIMAL)
    if res.status == NODE_LIMIT:
        assert res.nodes == 2


def test_binary_bounds_checked():
    prob = MilpProblem()
    j = prob.add_var("x", binary=True)
    prob.ub[j] = 2.0
    with pytest.raises(ValueError):
        solve_milp(prob)


def test_options_validated():
    with pytest.raises(ValueError):
        SolveOptions(abs_gap=0)
    with pytest.raises(ValueError):
        SolveOptions(backend="cplex")


# -- MPS ------------------------------------------------------------------------

def test_mps_round_trip():
    prob = _random_milp(np.random.default_rng(11))
    prob.constant = 2.5
    prob.lb[1] = 1.0
    back = read_mps(write_mps(prob))
    assert back.names == prob.names
    assert np.array_equal(back.binary, prob.binary)
    assert np.allclose(back.obj, prob.obj) and back.constant == prob.constant
    assert np.allclose(back.lb, prob.lb) and np.allclose(back.ub, prob.ub)
    assert np.allclose(back.matrix().toarray(), prob.matrix().toarray())
    assert [r.sense for r in back.rows] == [r.sense for r in prob.rows]
    assert solve_milp(back).objective == pytest.approx(solve_milp(prob).objective)


def test_mps_layout():
    text = write_mps(_knapsack())
    lines = text.splitlines()
    assert lines[0].startswith("NAME") and lines[-1] == "ENDATA"
    assert " L  R0000001" in lines
    assert any("'INTORG'" in line for line in lines)
    assert " BV BND       C0000001" in lines


def test_uc_mps_round_trip():
    cfg = tiny_config(units=[unit(c=0.01)], load=[10, 30, 25, 15])  # cold start: slot 0 <= p_min
    prob = build_uc(cfg, [0] * 4, [0] * 4)
    assert solve_milp(read_mps(write_mps(prob))).objective == pytest.approx(solve_milp(prob).objective)


# -- brute force ------------------------------------------------------------------

def test_min_up_excludes_single_on_slot():
    g = tiny_config(units=[unit(mu=2, md=1)]).units[0]
    pats = unit_patterns(g, 4)
    assert (0, 1, 0, 0) not in pats and (1, 0, 0, 0) not in pats
    assert (0, 0, 0, 1) in pats  # the run is clipped at the horizon end
    assert (1, 1, 0, 1) in pats


def test_brute_forced_flat_case_matches_milp():
    cfg = tiny_config(units=[unit(p_min=50, p_max=50, b=0.2, c=0.001, a=1.0)], load=[50] * 4)
    prob = build_uc(cfg, [0] * 4, [0] * 4)
    res = solve_milp(prob, BNB)
    sol = decode(prob, res.values, cfg, [0] * 4, [0] * 4)
    bf = brute_force_uc(cfg, [0] * 4, [0] * 4, power_step=5)
    assert np.allclose(sol.p_con, 50, atol=1e-9)
    assert bf.objective == pytest.approx(sol.cost_total, abs=1e-9)
    assert np.array_equal(bf.on[:, 0], sol.on[:, 0])


def test_brute_limits():
    cfg = tiny_config(T=7, load=[20] * 7)
    with pytest.raises(EnumerationLimitError):
        brute_force_uc(cfg, [0] * 7, [0] * 7, 5)
    cfg = tiny_config(units=[unit(p_min=12)])
    with pytest.raises(ValueError, match="does not divide"):
        brute_force_uc(cfg, [0] * 4, [0] * 4, 5)
