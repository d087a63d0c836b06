import itertools
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from flexprice.dsm import encode_energy_type  # noqa: E402
from flexprice.model import (  # noqa: E402
    AvailabilityWindow,
    EnergyType,
    FlexibleResource,
    TimeGrid,
    config_from_dict,
    example_config,
)
from flexprice.problem import MilpProblem  # noqa: E402

# single-core CI boxes make per-example timings noisy
settings.register_profile("default", deadline=None)
settings.load_profile("default")


def unit(name="G1", p_min=10, p_max=50, ramp=50, mu=1, md=1, su=0.0, sd=0.0, a=0.0, b=1.0, c=0.0):
    return {"name": name, "p_min": p_min, "p_max": p_max, "ramp_up": ramp, "ramp_down": ramp,
            "min_up": mu, "min_down": md, "startup_cost": su, "shutdown_cost": sd,
            "cost_a": a, "cost_b": b, "cost_c": c}


def tiny_doc(T=4, units=None, load=None, wind=None, solar=None, flexible=(), reserve=0.0, penalty=0.0):
    """A small configuration document; pieces not given are empty/zero."""
    doc = {
        "grid": {"slot_count": T, "slot_hours": 1.0},
        "units": units or [unit()],
        "renewables": [],
        "load": {"inflexible_load": load if load is not None else [20.0] * T},
        "flexible": list(flexible),
        "pricing": {"reserve_kw": reserve, "curtail_penalty": penalty, "scenario_count": 3, "rng_seed": 7},
    }
    if wind is not None:
        doc["renewables"].append({"name": "w", "kind": "wind", "capacity": max(max(wind), 1.0),
                                  "base_profile": list(wind), "sigma_fraction": 0.0})
    if solar is not None:
        doc["renewables"].append({"name": "s", "kind": "solar", "capacity": max(max(solar), 1.0),
                                  "base_profile": list(solar), "sigma_fraction": 0.0})
    return doc


def small_case_doc(n=6):
    """Two units, one wind source and one resource of each type over six slots."""
    doc = tiny_doc(
        T=6,
        units=[unit(name="A", p_min=10, p_max=60, c=0.01), unit(name="B", p_min=5, p_max=40, b=2.0, su=3.0)],
        load=[10, 30, 45, 40, 25, 15],
        reserve=5.0,
        penalty=0.2,
        flexible=[
            {"id": "e1", "kind": "energy", "window": "full", "d_min": 0, "d_max": 10, "ramp_up": 10,
             "ramp_down": 10, "baseline": [0, 0, 8, 8, 0, 0]},
            {"id": "p1", "kind": "power", "window": "full", "profile": [4, 4], "baseline": [0, 0, 4, 4, 0, 0]},
        ],
    )
    doc["renewables"] = [{"name": "w", "kind": "wind", "capacity": 25, "sigma_fraction": 0.3,
                          "base_profile": [0, 5, 0, 10, 20, 15]}]
    doc["pricing"].update(scenario_count=n, epsilon=0.34, rng_seed=11)
    return doc


def tiny_config(**kw):
    return config_from_dict(tiny_doc(**kw))


@pytest.fixture(scope="session")
def bundled():
    return example_config()


def encoded_alpha_feasibility(H, min_off, max_on):
    """Every 0/1 pattern of length H and whether it satisfies the encoded rows.

    D is held at 0, which is admissible for any pattern when d_min = 0, so
    only the on/off rows can reject a pattern.
    """
    res = FlexibleResource("x", EnergyType(0.0, 1.0, 1.0, 1.0, min_off, max_on), (0.0,) * H,
                           AvailabilityWindow("custom", tuple(range(H))))
    prob = MilpProblem()
    enc = encode_energy_type(prob, res, TimeGrid(H))
    pats = np.array(list(itertools.product((0, 1), repeat=H)))
    X = np.zeros((len(pats), prob.n_vars))
    for t, j in enc.alpha_vars.items():
        X[:, j] = pats[:, t]
    if prob.n_rows == 0:
        return pats, np.ones(len(pats), dtype=bool)
    ax = prob.matrix() @ X.T
    lo, hi = prob.row_bounds()
    ok = np.all((ax >= lo[:, None] - 1e-9) & (ax <= hi[:, None] + 1e-9), axis=0)
    return pats, ok


# -- acceptance report --------------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


def record(number: int, title: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE[number] = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    print(ACCEPTANCE[number])
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
