"""Domain types, configuration loading and availability-window arithmetic.

Power is in kW, energy in kWh, money in a single currency unit. Slots are
0-based; slot ``t`` covers the clock hour ``t:00`` on a 24-slot day.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

PEAK_SLOTS = tuple(range(10, 21))
VALLEY_SLOTS = tuple(range(0, 10)) + tuple(range(21, 24))

CAPACITY_RULES = ("peak_shift", "baseline_peak")


class ConfigError(ValueError):
    """Raised when a configuration violates an invariant.

    ``path`` names the offending field, e.g. ``units[1].p_min``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class ConfigParseError(ValueError):
    """Raised when the configuration document is not well-formed."""


@dataclass(frozen=True)
class TimeGrid:
    slot_count: int = 24
    slot_hours: float = 1.0

    @property
    def slots(self) -> range:
        return range(self.slot_count)


@dataclass(frozen=True)
class ConventionalUnit:
    name: str
    p_min: float
    p_max: float
    ramp_up: float
    ramp_down: float
    min_up: int
    min_down: int
    startup_cost: float
    shutdown_cost: float
    cost_a: float
    cost_b: float
    cost_c: float

    def fuel_cost(self, p):
        """Hourly fuel cost ``b*P + c*P**2`` (excludes the on-cost ``a``)."""
        return self.cost_b * p + self.cost_c * p * p


@dataclass(frozen=True)
class RenewableSource:
    name: str
    kind: str  # "wind" | "solar"
    capacity: float
    base_profile: tuple[float, ...]
    sigma_fraction: float = 0.0


@dataclass(frozen=True)
class AvailabilityWindow:
    kind: str  # "full" | "peak" | "valley" | "custom"
    custom_slots: tuple[int, ...] = ()

    @property
    def label(self) -> str:
        return self.kind

    def to_doc(self):
        if self.kind == "custom":
            return {"custom": list(self.custom_slots)}
        return self.kind


@dataclass(frozen=True)
class PowerType:
    profile: tuple[float, ...]


@dataclass(frozen=True)
class EnergyType:
    d_min: float
    d_max: float
    ramp_up: float
    ramp_down: float
    min_off: int = 0
    max_on: int | None = None  # None: unlimited


@dataclass(frozen=True)
class FlexibleResource:
    id: str
    kind: PowerType | EnergyType
    baseline: tuple[float, ...]
    window: AvailabilityWindow

    @property
    def type_name(self) -> str:
        return "power" if isinstance(self.kind, PowerType) else "energy"

    @property
    def group(self) -> tuple[str, str]:
        return (self.type_name, self.window.label)


@dataclass(frozen=True)
class MicrogridConfig:
    grid: TimeGrid
    units: tuple[ConventionalUnit, ...]
    renewables: tuple[RenewableSource, ...]
    inflexible_load: tuple[float, ...]
    flexible: tuple[FlexibleResource, ...]
    reserve_kw: tuple[float, ...]
    curtail_penalty: tuple[float, ...]
    epsilon: float = 0.15
    scenario_count: int = 100
    rng_seed: int = 0
    pwl_segments: int = 8
    capacity_rule: str = "peak_shift"
    reduction_ratio: float = 0.0
    flexible_share: float = 0.1
    share_factor: float = 1.0

    def replace(self, **changes) -> "MicrogridConfig":
        return dataclasses.replace(self, **changes)

    def wind_capacity(self) -> float:
        return sum(r.capacity for r in self.renewables if r.kind == "wind")

    def solar_capacity(self) -> float:
        return sum(r.capacity for r in self.renewables if r.kind == "solar")

    def installed_capacity(self) -> float:
        return sum(u.p_max for u in self.units) + sum(r.capacity for r in self.renewables)

    def groups(self) -> list[tuple[str, str]]:
        """Distinct (type, window) resource groups in config order."""
        seen: list[tuple[str, str]] = []
        for res in self.flexible:
            if res.group not in seen:
                seen.append(res.group)
        return seen

    def group_resources(self, group) -> tuple[FlexibleResource, ...]:
        group = parse_group(group)
        return tuple(r for r in self.flexible if r.group == group)


def parse_group(group) -> tuple[str, str]:
    """Accept ``"energy:full"`` or ``("energy", "full")``."""
    if isinstance(group, str):
        type_name, sep, window = group.partition(":")
        if not sep:
            raise ValueError(f"group must look like 'energy:full', got {group!r}")
        group = (type_name, window)
    type_name, window = group
    if type_name not in ("energy", "power"):
        raise ValueError(f"unknown resource type {type_name!r}")
    return (type_name, window)


def group_label(group) -> str:
    type_name, window = parse_group(group)
    return f"{type_name}:{window}"


# -- window arithmetic -------------------------------------------------------

def window_slots(window: AvailabilityWindow, grid: TimeGrid) -> tuple[int, ...]:
    """Sorted slots in which a resource may consume."""
    if window.kind == "full":
        return tuple(grid.slots)
    if window.kind in ("peak", "valley"):
        if grid.slot_count != 24:
            raise ValueError(
                f"{window.kind} window is defined for 24 slots, grid has {grid.slot_count}"
            )
        return PEAK_SLOTS if window.kind == "peak" else VALLEY_SLOTS
    if window.kind == "custom":
        slots = tuple(sorted(set(window.custom_slots)))
        if not slots:
            raise ValueError("custom window is empty")
        if slots[0] < 0 or slots[-1] >= grid.slot_count:
            raise ValueError(f"custom window slots out of range 0..{grid.slot_count - 1}")
        return slots
    raise ValueError(f"unknown window kind {window.kind!r}")


def contiguous_runs(slots: Sequence[int]) -> list[tuple[int, int]]:
    """Split sorted slots into inclusive ``(first, last)`` runs; no wrap-around."""
    runs: list[tuple[int, int]] = []
    for s in slots:
        if runs and s == runs[-1][1] + 1:
            runs[-1] = (runs[-1][0], s)
        else:
            runs.append((s, s))
    return runs


def power_start_positions(profile_len: int, window: AvailabilityWindow, grid: TimeGrid) -> list[int]:
    """Start slots at which a fixed curve fits wholly inside one window run."""
    starts = []
    for first, last in contiguous_runs(window_slots(window, grid)):
        starts.extend(range(first, last - profile_len + 2))
    return starts


def place_profile(profile: Sequence[float], start: int, slot_count: int) -> np.ndarray:
    out = np.zeros(slot_count)
    out[start:start + len(profile)] = profile
    return out


def baseline_demand(config: MicrogridConfig) -> np.ndarray:
    """No-DSM demand per slot: inflexible load plus every flexible baseline."""
    demand = np.array(config.inflexible_load, dtype=float)
    for res in config.flexible:
        demand = demand + np.asarray(res.baseline, dtype=float)
    return demand


# -- run-length helpers used by validation and by the encoding oracles -------

def run_lengths(bits: Sequence[int]) -> list[tuple[int, int, int]]:
    """``(value, start, length)`` for each maximal run in a 0/1 sequence."""
    runs: list[tuple[int, int, int]] = []
    for i, b in enumerate(bits):
        b = int(b)
        if runs and runs[-1][0] == b:
            v, s, n = runs[-1]
            runs[-1] = (v, s, n + 1)
        else:
            runs.append((b, i, 1))
    return runs


def onoff_pattern_ok(alpha: Sequence[int], min_off: int, max_on: int | None) -> bool:
    """True if no interior off-run is shorter than ``min_off`` and no on-run
    is longer than ``max_on``."""
    runs = run_lengths(alpha)
    for i, (v, _, n) in enumerate(runs):
        if v == 1 and max_on is not None and n > max_on:
            return False
        if v == 0 and 0 < i < len(runs) - 1 and n < min_off:
            return False
    return True


def power_baseline_start(res: FlexibleResource, grid: TimeGrid) -> int | None:
    """Start slot at which the baseline equals the resource's fixed curve."""
    profile = res.kind.profile
    baseline = np.asarray(res.baseline, dtype=float)
    for start in power_start_positions(len(profile), res.window, grid):
        if np.allclose(place_profile(profile, start, grid.slot_count), baseline, atol=1e-9):
            return start
    return None


def energy_baseline_violation(res: FlexibleResource, grid: TimeGrid) -> str | None:
    """Check that the baseline itself is a feasible energy-type dispatch.

    The baseline is judged on the whole horizon with zero consumption outside
    the window, the same convention the MILP encoding uses.
    """
    k: EnergyType = res.kind
    b = np.asarray(res.baseline, dtype=float)
    tol = 1e-9
    alpha = (b > tol).astype(int)
    for t in range(grid.slot_count):
        if alpha[t] and not (k.d_min - tol <= b[t] <= k.d_max + tol):
            return f"baseline[{t}]={b[t]:g} outside [{k.d_min:g}, {k.d_max:g}]"
    for t in range(1, grid.slot_count):
        if b[t] - b[t - 1] > k.ramp_up + tol:
            return f"baseline ramps up {b[t] - b[t - 1]:g} > {k.ramp_up:g} at slot {t}"
        if b[t - 1] - b[t] > k.ramp_down + tol:
            return f"baseline ramps down {b[t - 1] - b[t]:g} > {k.ramp_down:g} at slot {t}"
    if not onoff_pattern_ok(alpha, k.min_off, k.max_on):
        return "baseline on/off pattern violates min_off/max_on"
    return None


# -- loading / dumping ---------------------------------------------------------

def _require(doc: dict, key: str, path: str):
    if not isinstance(doc, dict):
        raise ConfigError(path, "expected a mapping")
    if key not in doc:
        raise ConfigError(f"{path}.{key}" if path else key, "missing")
    return doc[key]


def _num(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if not np.isfinite(value):
        raise ConfigError(path, "must be finite")
    return float(value)


def _int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return int(value)


def _profile(value, n: int, path: str) -> tuple[float, ...]:
    if not isinstance(value, list):
        raise ConfigError(path, "expected a list")
    if len(value) != n:
        raise ConfigError(path, f"profile length {len(value)} != slot_count {n}")
    return tuple(_num(v, f"{path}[{i}]") for i, v in enumerate(value))


def _per_slot(value, n: int, path: str) -> tuple[float, ...]:
    if isinstance(value, list):
        return _profile(value, n, path)
    return (_num(value, path),) * n


def _window(value, path: str) -> AvailabilityWindow:
    if isinstance(value, str) and value in ("full", "peak", "valley"):
        return AvailabilityWindow(value)
    if isinstance(value, dict) and set(value) == {"custom"} and isinstance(value["custom"], list):
        return AvailabilityWindow("custom", tuple(_int(s, f"{path}.custom") for s in value["custom"]))
    raise ConfigError(path, f"expected full|peak|valley|{{custom: [...]}}, got {value!r}")


def _unit(doc: dict, i: int) -> ConventionalUnit:
    p = f"units[{i}]"
    get = lambda k: _require(doc, k, p)  # noqa: E731
    unit = ConventionalUnit(
        name=str(doc.get("name", f"G{i + 1}")),
        p_min=_num(get("p_min"), f"{p}.p_min"),
        p_max=_num(get("p_max"), f"{p}.p_max"),
        ramp_up=_num(get("ramp_up"), f"{p}.ramp_up"),
        ramp_down=_num(get("ramp_down"), f"{p}.ramp_down"),
        min_up=_int(get("min_up"), f"{p}.min_up"),
        min_down=_int(get("min_down"), f"{p}.min_down"),
        startup_cost=_num(doc.get("startup_cost", 0.0), f"{p}.startup_cost"),
        shutdown_cost=_num(doc.get("shutdown_cost", 0.0), f"{p}.shutdown_cost"),
        cost_a=_num(get("cost_a"), f"{p}.cost_a"),
        cost_b=_num(get("cost_b"), f"{p}.cost_b"),
        cost_c=_num(get("cost_c"), f"{p}.cost_c"),
    )
    if unit.p_min < 0:
        raise ConfigError(f"{p}.p_min", "must be >= 0")
    if unit.p_min > unit.p_max:
        raise ConfigError(f"{p}.p_min", f"p_min {unit.p_min:g} > p_max {unit.p_max:g} on unit {unit.name}")
    if unit.ramp_up <= 0 or unit.ramp_down <= 0:
        raise ConfigError(f"{p}.ramp_up", "ramp rates must be > 0")
    if unit.min_up < 1 or unit.min_down < 1:
        raise ConfigError(f"{p}.min_up", "min_up and min_down must be >= 1")
    for name in ("startup_cost", "shutdown_cost", "cost_a", "cost_b", "cost_c"):
        if getattr(unit, name) < 0:
            raise ConfigError(f"{p}.{name}", "must be >= 0")
    return unit


def _renewable(doc: dict, i: int, n: int) -> RenewableSource:
    p = f"renewables[{i}]"
    kind = _require(doc, "kind", p)
    if kind not in ("wind", "solar"):
        raise ConfigError(f"{p}.kind", f"expected wind|solar, got {kind!r}")
    src = RenewableSource(
        name=str(doc.get("name", f"{kind}{i + 1}")),
        kind=kind,
        capacity=_num(_require(doc, "capacity", p), f"{p}.capacity"),
        base_profile=_profile(_require(doc, "base_profile", p), n, f"{p}.base_profile"),
        sigma_fraction=_num(doc.get("sigma_fraction", 0.0), f"{p}.sigma_fraction"),
    )
    if src.capacity < 0:
        raise ConfigError(f"{p}.capacity", "must be >= 0")
    if src.sigma_fraction < 0:
        raise ConfigError(f"{p}.sigma_fraction", "must be >= 0")
    for t, v in enumerate(src.base_profile):
        if not 0 <= v <= src.capacity:
            raise ConfigError(f"{p}.base_profile[{t}]", f"{v:g} outside [0, capacity={src.capacity:g}]")
    return src


def _flexible(doc: dict, i: int, grid: TimeGrid) -> FlexibleResource:
    p = f"flexible[{i}]"
    rid = str(_require(doc, "id", p))
    kind_name = _require(doc, "kind", p)
    window = _window(_require(doc, "window", p), f"{p}.window")
    try:
        slots = window_slots(window, grid)
    except ValueError as exc:
        raise ConfigError(f"{p}.window", str(exc)) from None
    baseline = _profile(_require(doc, "baseline", p), grid.slot_count, f"{p}.baseline")
    inside = set(slots)
    for t, v in enumerate(baseline):
        if v < 0:
            raise ConfigError(f"{p}.baseline[{t}]", "must be >= 0")
        if t not in inside and v != 0:
            raise ConfigError(f"{p}.baseline[{t}]", "baseline must be 0 outside the availability window")

    if kind_name == "power":
        raw = _require(doc, "profile", p)
        if not isinstance(raw, list) or not raw:
            raise ConfigError(f"{p}.profile", "expected a nonempty list")
        profile = tuple(_num(v, f"{p}.profile[{j}]") for j, v in enumerate(raw))
        if any(v <= 0 for v in profile):
            raise ConfigError(f"{p}.profile", "profile values must be > 0")
        longest = max(b - a + 1 for a, b in contiguous_runs(slots))
        if len(profile) > longest:
            raise ConfigError(
                f"{p}.profile", f"profile length {len(profile)} exceeds longest window run {longest}"
            )
        res = FlexibleResource(rid, PowerType(profile), baseline, window)
        if power_baseline_start(res, grid) is None:
            raise ConfigError(f"{p}.baseline", "baseline must equal the profile placed at a feasible start")
        return res

    if kind_name == "energy":
        get = lambda k: _require(doc, k, p)  # noqa: E731
        max_on = doc.get("max_on")
        kind = EnergyType(
            d_min=_num(get("d_min"), f"{p}.d_min"),
            d_max=_num(get("d_max"), f"{p}.d_max"),
            ramp_up=_num(get("ramp_up"), f"{p}.ramp_up"),
            ramp_down=_num(get("ramp_down"), f"{p}.ramp_down"),
            min_off=_int(doc.get("min_off", 0), f"{p}.min_off"),
            max_on=None if max_on is None else _int(max_on, f"{p}.max_on"),
        )
        if not 0 <= kind.d_min <= kind.d_max:
            raise ConfigError(f"{p}.d_min", "need 0 <= d_min <= d_max")
        if kind.ramp_up <= 0 or kind.ramp_down <= 0:
            raise ConfigError(f"{p}.ramp_up", "ramp rates must be > 0")
        if kind.min_off < 0:
            raise ConfigError(f"{p}.min_off", "must be >= 0")
        if kind.max_on is not None and kind.max_on < 1:
            raise ConfigError(f"{p}.max_on", "must be >= 1")
        res = FlexibleResource(rid, kind, baseline, window)
        problem = energy_baseline_violation(res, grid)
        if problem:
            raise ConfigError(f"{p}.baseline", problem)
        return res

    raise ConfigError(f"{p}.kind", f"expected power|energy, got {kind_name!r}")


def config_from_dict(doc: dict) -> MicrogridConfig:
    if not isinstance(doc, dict):
        raise ConfigParseError("configuration document must be a mapping")
    g = _require(doc, "grid", "")
    grid = TimeGrid(
        slot_count=_int(_require(g, "slot_count", "grid"), "grid.slot_count"),
        slot_hours=_num(g.get("slot_hours", 1.0), "grid.slot_hours"),
    )
    if grid.slot_count < 2:
        raise ConfigError("grid.slot_count", "must be >= 2")
    if grid.slot_hours <= 0:
        raise ConfigError("grid.slot_hours", "must be > 0")
    n = grid.slot_count

    units_doc = _require(doc, "units", "")
    if not isinstance(units_doc, list) or not units_doc:
        raise ConfigError("units", "expected a nonempty list")
    units = tuple(_unit(u, i) for i, u in enumerate(units_doc))

    ren_doc = doc.get("renewables", []) or []
    if not isinstance(ren_doc, list):
        raise ConfigError("renewables", "expected a list")
    renewables = tuple(_renewable(r, i, n) for i, r in enumerate(ren_doc))

    load = _require(doc, "load", "")
    inflexible = _profile(_require(load, "inflexible_load", "load"), n, "load.inflexible_load")
    if any(v < 0 for v in inflexible):
        raise ConfigError("load.inflexible_load", "must be >= 0")

    flex_doc = doc.get("flexible", []) or []
    if not isinstance(flex_doc, list):
        raise ConfigError("flexible", "expected a list")
    flexible = tuple(_flexible(f, i, grid) for i, f in enumerate(flex_doc))
    ids = [f.id for f in flexible]
    if len(set(ids)) != len(ids):
        raise ConfigError("flexible", "resource ids must be unique")

    pr = doc.get("pricing", {}) or {}
    if not isinstance(pr, dict):
        raise ConfigError("pricing", "expected a mapping")
    cfg = MicrogridConfig(
        grid=grid,
        units=units,
        renewables=renewables,
        inflexible_load=inflexible,
        flexible=flexible,
        reserve_kw=_per_slot(pr.get("reserve_kw", 0.0), n, "pricing.reserve_kw"),
        curtail_penalty=_per_slot(pr.get("curtail_penalty", 0.0), n, "pricing.curtail_penalty"),
        epsilon=_num(pr.get("epsilon", 0.15), "pricing.epsilon"),
        scenario_count=_int(pr.get("scenario_count", 100), "pricing.scenario_count"),
        rng_seed=_int(pr.get("rng_seed", 0), "pricing.rng_seed"),
        pwl_segments=_int(pr.get("pwl_segments", 8), "pricing.pwl_segments"),
        capacity_rule=str(pr.get("capacity_rule", "peak_shift")),
        reduction_ratio=_num(pr.get("reduction_ratio", 0.0), "pricing.reduction_ratio"),
        flexible_share=_num(pr.get("flexible_share", 0.1), "pricing.flexible_share"),
        share_factor=_num(pr.get("share_factor", 1.0), "pricing.share_factor"),
    )
    validate(cfg)
    return cfg


def validate(cfg: MicrogridConfig) -> None:
    """Cross-field checks; field-level checks happen while parsing."""
    if not 0 <= cfg.epsilon < 1:
        raise ConfigError("pricing.epsilon", "must lie in [0, 1)")
    if cfg.scenario_count < 1:
        raise ConfigError("pricing.scenario_count", "must be >= 1")
    if not 0 <= cfg.rng_seed < 2**64:
        raise ConfigError("pricing.rng_seed", "must be a 64-bit unsigned integer")
    if cfg.pwl_segments < 1:
        raise ConfigError("pricing.pwl_segments", "must be >= 1")
    if cfg.capacity_rule not in CAPACITY_RULES:
        raise ConfigError("pricing.capacity_rule", f"expected one of {CAPACITY_RULES}")
    if not 0 <= cfg.reduction_ratio < 1:
        raise ConfigError("pricing.reduction_ratio", "must lie in [0, 1)")
    if not 0 < cfg.flexible_share < 1:
        raise ConfigError("pricing.flexible_share", "must lie in (0, 1)")
    if not 0 < cfg.share_factor <= 1:
        raise ConfigError("pricing.share_factor", "must lie in (0, 1]")
    for name in ("reserve_kw", "curtail_penalty"):
        if any(v < 0 for v in getattr(cfg, name)):
            raise ConfigError(f"pricing.{name}", "must be >= 0")

    demand = baseline_demand(cfg)
    p_max_total = sum(u.p_max for u in cfg.units)
    ren_total = sum(r.capacity for r in cfg.renewables)
    if p_max_total + ren_total < demand.max() - 1e-9:
        raise ConfigError("load", f"peak demand {demand.max():g} kW exceeds installed capacity")
    for t in range(cfg.grid.slot_count):
        if p_max_total < cfg.reserve_kw[t] + demand[t] - 1e-9:
            raise ConfigError(
                f"pricing.reserve_kw[{t}]",
                f"reserve {cfg.reserve_kw[t]:g} + demand {demand[t]:g} exceeds committed capacity {p_max_total:g}",
            )


def config_to_dict(cfg: MicrogridConfig) -> dict[str, Any]:
    def per_slot(values):
        return values[0] if len(set(values)) == 1 else list(values)

    flex = []
    for res in cfg.flexible:
        entry: dict[str, Any] = {"id": res.id, "kind": res.type_name, "window": res.window.to_doc()}
        if isinstance(res.kind, PowerType):
            entry["profile"] = list(res.kind.profile)
        else:
            entry.update(dataclasses.asdict(res.kind))
        entry["baseline"] = list(res.baseline)
        flex.append(entry)
    return {
        "grid": dataclasses.asdict(cfg.grid),
        "units": [dataclasses.asdict(u) for u in cfg.units],
        "renewables": [
            {**dataclasses.asdict(r), "base_profile": list(r.base_profile)} for r in cfg.renewables
        ],
        "load": {"inflexible_load": list(cfg.inflexible_load)},
        "flexible": flex,
        "pricing": {
            "reserve_kw": per_slot(cfg.reserve_kw),
            "curtail_penalty": per_slot(cfg.curtail_penalty),
            "epsilon": cfg.epsilon,
            "scenario_count": cfg.scenario_count,
            "rng_seed": cfg.rng_seed,
            "pwl_segments": cfg.pwl_segments,
            "capacity_rule": cfg.capacity_rule,
            "reduction_ratio": cfg.reduction_ratio,
            "flexible_share": cfg.flexible_share,
            "share_factor": cfg.share_factor,
        },
    }


def load_config(text: str) -> MicrogridConfig:
    """Parse and validate a YAML (or JSON) configuration document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigParseError(f"malformed configuration: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigParseError("configuration document must be a mapping")
    return config_from_dict(doc)


def dump_config(cfg: MicrogridConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False, default_flow_style=None, width=120)


def read_config(path) -> MicrogridConfig:
    return load_config(Path(path).read_text())


def example_config_path() -> Path:
    """Path of the bundled case-study configuration."""
    return Path(str(resources.files("flexprice") / "data" / "paper_case.yaml"))


def example_config() -> MicrogridConfig:
    return read_config(example_config_path())
