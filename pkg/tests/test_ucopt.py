import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import tiny_config, unit
from flexprice.model import ConventionalUnit
from flexprice.scenario import generate, scenario_slice
from flexprice.solver import OPTIMAL, solve_milp
from flexprice.ucopt import (
    DecodeError,
    InfeasibleModelError,
    build_uc,
    check_schedule,
    cost_json,
    decode,
    pwl_cost,
    pwl_error_bound,
    pwl_eval,
    solution_csv,
)


def _unit(**kw):
    base = dict(name="G", p_min=15.0, p_max=80.0, ramp_up=40.0, ramp_down=40.0, min_up=1, min_down=1,
                startup_cost=0.0, shutdown_cost=0.0, cost_a=0.0, cost_b=0.1, cost_c=0.0013)
    base.update(kw)
    return ConventionalUnit(**base)


def _dispatch(cfg, wind, solar, dsm=False):
    prob = build_uc(cfg, wind, solar, dsm)
    res = solve_milp(prob)
    assert res.status == OPTIMAL
    return prob, res, decode(prob, res.values, cfg, wind, solar)


@pytest.fixture(scope="module")
def bundled_dispatch(bundled):
    wind, solar = scenario_slice(generate(bundled, n=1), 0)
    prob, res, sol = _dispatch(bundled, wind, solar)
    return bundled, wind, solar, prob, sol


# -- piecewise-linear fuel cost -------------------------------------------------

def test_pwl_exact_at_breakpoints(bundled):
    g1 = bundled.units[0]
    lines = pwl_cost(g1, 8)
    assert len(lines) == 8
    for p in np.linspace(g1.p_min, g1.p_max, 9):
        assert pwl_eval(lines, p) == pytest.approx(g1.fuel_cost(p), abs=1e-9)
    # 100 kW is not a breakpoint; the surrogate stays within the bound above 30.89
    assert 0 <= pwl_eval(lines, 100.0) - 30.89 <= pwl_error_bound(g1, 8)


def test_pwl_error_dense_sampling(bundled):
    g3 = bundled.units[2]
    assert pwl_error_bound(g3, 8) == pytest.approx(0.0013 * (65 / 8) ** 2 / 4)
    assert pwl_error_bound(g3, 8) <= 0.0215
    lines = pwl_cost(g3, 8)
    ps = np.linspace(g3.p_min, g3.p_max, 20_001)
    err = np.array([pwl_eval(lines, p) for p in ps]) - g3.fuel_cost(ps)
    assert err.min() >= -1e-12
    assert err.max() <= pwl_error_bound(g3, 8) + 1e-12
    assert err.max() == pytest.approx(pwl_error_bound(g3, 8), rel=1e-3)  # attained at midpoints


def test_pwl_linear_unit_single_line():
    g = _unit(cost_c=0.0, cost_b=0.25)
    lines = pwl_cost(g, 8)
    assert lines == [(0.25, 0.0)]
    for p in (15.0, 33.3, 80.0):
        assert pwl_eval(lines, p) == pytest.approx(g.fuel_cost(p))


def test_pwl_degenerate_range_and_bad_segments():
    g = _unit(p_min=50.0, p_max=50.0)
    assert pwl_cost(g, 4) == [(0.0, pytest.approx(g.fuel_cost(50.0)))]
    with pytest.raises(ValueError):
        pwl_cost(_unit(), 0)


# -- building ------------------------------------------------------------------

def test_bundled_binary_count(bundled):
    prob = build_uc(bundled, [0.0] * 24, [0.0] * 24)
    assert prob.n_binary == 3 * 3 * 24
    assert prob.index("P_con[t=3,l=1]") >= 0


def test_reserve_limit_detected_before_solving(bundled):
    # all units on commit 400 kW, so with 25 kW reserve the demand may not exceed 375
    assert sum(g.p_max for g in bundled.units) == 400
    load = list(bundled.inflexible_load)
    extra = 376.0 - (load[0] + sum(r.baseline[0] for r in bundled.flexible))
    load[0] += extra
    with pytest.raises(InfeasibleModelError, match="reserve"):
        build_uc(bundled.replace(inflexible_load=tuple(load)), [0.0] * 24, [0.0] * 24)


def test_demand_above_capacity_detected():
    # replace() skips load validation, so the builder's own check is reached
    cfg = tiny_config(load=[10, 40, 20, 20], wind=[0, 15, 0, 0]).replace(inflexible_load=(10, 60, 20, 20))
    with pytest.raises(InfeasibleModelError, match="slot 1: demand 60 exceeds available supply"):
        build_uc(cfg, [0] * 4, [0] * 4)
    # wind covers the energy but not the reserve, which counts committed units only
    with pytest.raises(InfeasibleModelError, match="slot 1: reserve"):
        build_uc(cfg, [0, 15, 0, 0], [0] * 4)


def test_profile_length_checked():
    with pytest.raises(ValueError):
        build_uc(tiny_config(), [0] * 3, [0] * 4)


def test_forced_dispatch():
    cfg = tiny_config(units=[unit(p_min=50, p_max=50, b=0.2)], load=[50] * 4)
    _, _, sol = _dispatch(cfg, [0] * 4, [0] * 4)
    assert np.array_equal(sol.p_con[:, 0], [50] * 4)
    assert np.array_equal(sol.on[:, 0], [1] * 4)
    assert sol.start[0, 0] == 1 and sol.start[1:, 0].sum() == 0
    assert sol.cost_total == pytest.approx(4 * 0.2 * 50)


def test_cold_start_limits_first_slot():
    # slot 0 output is capped at p_min because the unit starts from off
    cfg = tiny_config(load=[20, 20, 20, 20])
    with pytest.raises(Exception):
        _dispatch(cfg, [0] * 4, [0] * 4)
    _, _, sol = _dispatch(cfg, [10, 0, 0, 0], [0] * 4)
    assert sol.p_con[0, 0] == pytest.approx(10)


# -- decoding and checking ---------------------------------------------------------

def test_bundled_dispatch_clean(bundled_dispatch):
    cfg, wind, solar, prob, sol = bundled_dispatch
    assert check_schedule(sol, cfg, wind, solar) == []
    supply = sol.p_con.sum(axis=1) + sol.wind_used + sol.solar_used
    assert np.max(np.abs(supply - sol.demand)) <= 1e-6
    assert np.max(np.abs(sol.curtailed - (wind + solar - sol.wind_used - sol.solar_used))) <= 1e-6
    assert np.all(sol.curtailed >= 0)
    assert np.all(sol.start >= sol.on - np.vstack([np.zeros((1, 3)), sol.on[:-1]]))


def test_surrogate_over_true_within_bound(bundled_dispatch):
    cfg, _, _, _, sol = bundled_dispatch
    bound = sum(pwl_error_bound(g, cfg.pwl_segments) for g in cfg.units) * cfg.grid.slot_count
    assert -1e-6 <= sol.objective - sol.cost_total <= bound * cfg.grid.slot_hours + 1e-6


def test_flipped_commitment_flagged(bundled_dispatch):
    cfg, wind, solar, _, sol = bundled_dispatch
    t, l = map(int, np.argwhere(sol.p_con > 0)[0])
    on = sol.on.copy()
    on[t, l] = 0
    bad = check_schedule(_replace(sol, on=on), cfg, wind, solar)
    assert any(v.constraint == "capacity_max" and v.slot == t and v.who == cfg.units[l].name for v in bad)


def test_short_run_flagged():
    cfg = tiny_config(units=[unit(mu=3)], load=[10, 20, 20, 20])
    _, _, sol = _dispatch(cfg, [0] * 4, [0] * 4)
    assert check_schedule(sol, cfg, [0] * 4, [0] * 4) == []
    on, p = sol.on.copy(), sol.p_con.copy()
    on[2:, 0] = 0
    p[2:, 0] = 0
    stop = sol.stop.copy()
    stop[2, 0] = 1
    bad = check_schedule(_replace(sol, on=on, p_con=p, stop=stop), cfg, [0] * 4, [0] * 4)
    assert any(v.constraint == "min_up" and v.slot == 0 for v in bad)


def test_decode_rejects_fractional_binary():
    cfg = tiny_config(load=[10, 20, 20, 20])
    prob, res, _ = _dispatch(cfg, [0] * 4, [0] * 4)
    x = res.values.copy()
    x[prob.index("o[t=1,l=0]")] = 0.5
    with pytest.raises(DecodeError, match="integral"):
        decode(prob, x, cfg, [0] * 4, [0] * 4)


def test_decode_rejects_infeasible_values():
    cfg = tiny_config(load=[10, 20, 20, 20])
    prob, res, _ = _dispatch(cfg, [0] * 4, [0] * 4)
    x = res.values.copy()
    x[prob.index("P_con[t=2,l=0]")] += 1.0
    with pytest.raises(DecodeError, match="violated"):
        decode(prob, x, cfg, [0] * 4, [0] * 4)
    with pytest.raises(DecodeError):
        decode(prob, x[:-1], cfg, [0] * 4, [0] * 4)


def test_exports(bundled_dispatch):
    cfg, _, _, _, sol = bundled_dispatch
    blocks = solution_csv(sol, cfg).split("\n\n")
    assert blocks[0].splitlines()[0] == "slot,unit,on,p_kw"
    assert len(blocks[0].splitlines()) == 1 + 24 * 3
    assert blocks[1].splitlines()[0] == "slot,wind_used,solar_used,curtailed"
    assert blocks[2].splitlines()[0] == "slot,resource,alpha,d_kw,delta_kw"
    assert '"cost_total"' in cost_json(sol)


@settings(max_examples=15)
@given(st.lists(st.floats(0, 30), min_size=4, max_size=4), st.lists(st.floats(0, 20), min_size=4, max_size=4))
def test_more_renewables_never_cost_more(wind, extra):
    # holds with free curtailment; with a penalty, surplus beside units held at
    # p_min is spilled and charged, so extra output can raise the cost
    cfg = tiny_config(units=[unit(name="A", c=0.01), unit(name="B", p_min=5, p_max=40, b=2.0, su=3.0)],
                      load=[15, 40, 60, 30], reserve=5.0, penalty=0.0)
    lo = build_uc(cfg, wind, [0] * 4)
    hi = build_uc(cfg, np.add(wind, extra), [0] * 4)
    a, b = solve_milp(lo), solve_milp(hi)
    assert a.status == b.status == OPTIMAL
    assert b.objective <= a.objective + 1e-6


def test_penalized_surplus_can_raise_cost():
    cfg = tiny_config(units=[unit(name="A", c=0.01), unit(name="B", p_min=5, p_max=40, b=2.0, su=3.0)],
                      load=[15, 40, 60, 30], reserve=5.0, penalty=0.3)
    a = solve_milp(build_uc(cfg, [0] * 4, [0] * 4))
    b = solve_milp(build_uc(cfg, [1, 0, 0, 0], [0] * 4))
    assert b.objective == pytest.approx(a.objective + 0.3)


def _replace(sol, **kw):
    import dataclasses
    return dataclasses.replace(sol, **kw)
