import numpy as np
import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from conftest import tiny_doc, unit
from oracles import pattern_allowed
from flexprice.model import (
    AvailabilityWindow,
    ConfigError,
    ConfigParseError,
    TimeGrid,
    baseline_demand,
    config_from_dict,
    contiguous_runs,
    dump_config,
    example_config_path,
    load_config,
    onoff_pattern_ok,
    parse_group,
    power_start_positions,
    window_slots,
)

GRID24 = TimeGrid(24)


def test_bundled_units(bundled):
    assert len(bundled.units) == 3
    g1, g2, g3 = bundled.units
    assert (g1.p_max, g1.p_min) == (120, 30)
    assert (g2.p_max, g2.p_min) == (200, 80)
    assert (g3.p_max, g3.p_min) == (80, 15)
    assert (g1.cost_b, g1.cost_c) == (0.1489, 0.0016)
    assert g2.startup_cost == 4.5
    assert bundled.reserve_kw == (25.0,) * 24
    assert bundled.curtail_penalty == (0.6,) * 24
    assert (bundled.scenario_count, bundled.epsilon, bundled.flexible_share) == (100, 0.15, 0.1)


def test_bundled_flexible_share(bundled):
    # renewables are 20% and every group 10% of installed capacity
    assert bundled.installed_capacity() == 500
    assert bundled.wind_capacity() + bundled.solar_capacity() == 100
    for g in bundled.groups():
        peak = sum(max(r.baseline) for r in bundled.group_resources(g))
        assert peak == pytest.approx(0.1 * bundled.installed_capacity())
    assert len(bundled.groups()) == 6


def test_bundled_demand_peaks_in_peak_window(bundled):
    d = baseline_demand(bundled)
    assert 10 <= int(np.argmax(d)) <= 20
    assert np.all(d >= np.asarray(bundled.inflexible_load))


def test_unit_fuel_cost_g1(bundled):
    assert bundled.units[0].fuel_cost(100.0) == pytest.approx(30.89)


def test_p_min_above_p_max_names_unit():
    doc = tiny_doc(units=[unit(name="G7", p_min=60, p_max=50)])
    with pytest.raises(ConfigError) as err:
        config_from_dict(doc)
    assert "G7" in str(err.value) and err.value.path == "units[0].p_min"


def test_profile_length_mismatch():
    doc = tiny_doc(T=24, load=[10.0] * 23)
    with pytest.raises(ConfigError, match="profile length"):
        config_from_dict(doc)


def test_malformed_document():
    with pytest.raises(ConfigParseError):
        load_config("grid: [unclosed")
    with pytest.raises(ConfigParseError):
        load_config("- just\n- a list\n")


def test_missing_field_path():
    doc = tiny_doc()
    del doc["units"][0]["cost_b"]
    with pytest.raises(ConfigError) as err:
        config_from_dict(doc)
    assert err.value.path == "units[0].cost_b"


def test_reserve_unsatisfiable():
    with pytest.raises(ConfigError, match="reserve"):
        config_from_dict(tiny_doc(reserve=40.0))  # 20 + 40 > 50


def test_baseline_outside_window_rejected():
    res = {"id": "x", "kind": "power", "window": {"custom": [0, 1]}, "profile": [5],
           "baseline": [0, 0, 5, 0]}
    with pytest.raises(ConfigError, match="outside the availability window"):
        config_from_dict(tiny_doc(flexible=[res]))


def test_energy_baseline_must_be_feasible():
    res = {"id": "x", "kind": "energy", "window": "full", "d_min": 0, "d_max": 10,
           "ramp_up": 3, "ramp_down": 3, "baseline": [0, 10, 0, 0]}
    with pytest.raises(ConfigError, match="ramps up"):
        config_from_dict(tiny_doc(flexible=[res]))


def test_window_slots():
    assert window_slots(AvailabilityWindow("peak"), GRID24) == tuple(range(10, 21))
    valley = window_slots(AvailabilityWindow("valley"), GRID24)
    assert valley == tuple(range(10)) + (21, 22, 23)
    assert len(valley) == 13
    assert window_slots(AvailabilityWindow("full"), GRID24) == tuple(range(24))
    peak = set(window_slots(AvailabilityWindow("peak"), GRID24))
    assert peak.isdisjoint(valley) and peak | set(valley) == set(range(24))


def test_peak_needs_24_slots():
    with pytest.raises(ValueError):
        window_slots(AvailabilityWindow("peak"), TimeGrid(12))


def test_custom_window_any_grid():
    assert window_slots(AvailabilityWindow("custom", (3, 1)), TimeGrid(5)) == (1, 3)
    with pytest.raises(ValueError):
        window_slots(AvailabilityWindow("custom", (5,)), TimeGrid(5))


def test_valley_start_positions():
    starts = power_start_positions(3, AvailabilityWindow("valley"), GRID24)
    assert starts == list(range(8)) + [21]
    assert power_start_positions(12, AvailabilityWindow("peak"), GRID24) == []
    assert contiguous_runs([0, 1, 2, 5, 6, 9]) == [(0, 2), (5, 6), (9, 9)]


def test_baseline_demand_terms():
    assert np.array_equal(baseline_demand(config_from_dict(tiny_doc())), [20.0] * 4)
    res = {"id": "x", "kind": "power", "window": "full", "profile": [40], "baseline": [0, 0, 40, 0]}
    cfg = config_from_dict(tiny_doc(units=[unit(p_max=80)], flexible=[res]))
    assert np.array_equal(baseline_demand(cfg), [20, 20, 60, 20])


def test_round_trip(bundled):
    again = load_config(dump_config(bundled))
    assert again == bundled
    # the shipped file itself parses to the same structure
    assert load_config(example_config_path().read_text()) == bundled


def test_round_trip_per_slot_penalty():
    doc = tiny_doc()
    doc["pricing"]["curtail_penalty"] = [0.1, 0.2, 0.3, 0.4]
    cfg = config_from_dict(doc)
    assert load_config(dump_config(cfg)) == cfg
    assert yaml.safe_load(dump_config(cfg))["pricing"]["curtail_penalty"] == [0.1, 0.2, 0.3, 0.4]


def test_parse_group():
    assert parse_group("energy:full") == ("energy", "full")
    assert parse_group(("power", "valley")) == ("power", "valley")
    with pytest.raises(ValueError):
        parse_group("energy")
    with pytest.raises(ValueError):
        parse_group("heat:full")


@given(st.lists(st.integers(0, 1), min_size=1, max_size=12), st.integers(0, 4), st.integers(1, 6))
def test_onoff_pattern_matches_run_scan(bits, min_off, max_on):
    assert onoff_pattern_ok(bits, min_off, max_on) == pattern_allowed(bits, min_off, max_on)
