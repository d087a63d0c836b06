"""Seeded Monte Carlo scenarios for wind and solar output."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .model import MicrogridConfig

MAX_REJECTIONS = 64


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    """``n`` realizations of aggregated wind and solar output, kW [n, T]."""

    n: int
    wind: np.ndarray
    solar: np.ndarray
    seed: int

    def __post_init__(self):
        for name in ("wind", "solar"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 2 or arr.shape[0] != self.n:
                raise ValueError(f"{name} must have shape [n, slot_count]")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.wind.shape != self.solar.shape:
            raise ValueError("wind and solar shapes differ")

    @property
    def slot_count(self) -> int:
        return self.wind.shape[1]

    def __eq__(self, other):
        if not isinstance(other, ScenarioSet):
            return NotImplemented
        return (self.n == other.n and self.seed == other.seed
                and np.array_equal(self.wind, other.wind) and np.array_equal(self.solar, other.solar))

    def renewable(self) -> np.ndarray:
        return self.wind + self.solar


def _truncated_draws(rng: np.random.Generator, mean: np.ndarray, sd: np.ndarray, cap: float) -> np.ndarray:
    """Independent truncated-normal draws on [0, cap], one per slot.

    Out-of-range slots are redrawn; after MAX_REJECTIONS rounds the stragglers
    are clamped so generation always terminates.
    """
    out = rng.normal(mean, sd)
    bad = (out < 0) | (out > cap)
    for _ in range(MAX_REJECTIONS):
        if not bad.any():
            break
        redraw = rng.normal(mean, sd)
        out = np.where(bad, redraw, out)
        bad = (out < 0) | (out > cap)
    return np.clip(out, 0.0, cap)


def _source_stream(config: MicrogridConfig, seed: int, src: int, scen: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(src, scen)))


def generate(config: MicrogridConfig, seed: int | None = None, n: int | None = None) -> ScenarioSet:
    """Draw ``n`` scenarios (default ``config.scenario_count``).

    Each (source, scenario) pair has its own random stream, so scenario ``i``
    does not depend on how many scenarios are drawn.
    """
    seed = config.rng_seed if seed is None else int(seed)
    n = config.scenario_count if n is None else int(n)
    if n < 1:
        raise ValueError("scenario count must be >= 1")
    T = config.grid.slot_count
    wind = np.zeros((n, T))
    solar = np.zeros((n, T))
    for src, ren in enumerate(config.renewables):
        base = np.asarray(ren.base_profile, dtype=float)
        sd = ren.sigma_fraction * base
        target = wind if ren.kind == "wind" else solar
        for i in range(n):
            if ren.sigma_fraction == 0:
                target[i] += base
                continue
            rng = _source_stream(config, seed, src, i)
            target[i] += _truncated_draws(rng, base, sd, ren.capacity)
    return ScenarioSet(n, wind, solar, seed)


def scenario_slice(scenarios: ScenarioSet, i: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0 <= i < scenarios.n:
        raise IndexError(f"scenario index {i} out of range [0, {scenarios.n})")
    return scenarios.wind[i].copy(), scenarios.solar[i].copy()


def to_csv(scenarios: ScenarioSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "slot", "wind_kw", "solar_kw"])
    for i in range(scenarios.n):
        for t in range(scenarios.slot_count):
            w.writerow([i, t, repr(float(scenarios.wind[i, t])), repr(float(scenarios.solar[i, t]))])
    return buf.getvalue()


def from_csv(text: str, seed: int = 0) -> ScenarioSet:
    """Inverse of :func:`to_csv` (values round-trip exactly)."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["scenario", "slot", "wind_kw", "solar_kw"]:
        raise ValueError("expected header scenario,slot,wind_kw,solar_kw")
    data = {}
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != 4:
            raise ValueError(f"line {k}: expected 4 fields")
        try:
            data[int(row[0]), int(row[1])] = (float(row[2]), float(row[3]))
        except ValueError:
            raise ValueError(f"line {k}: malformed number") from None
    if not data:
        raise ValueError("no scenario rows")
    n = max(i for i, _ in data) + 1
    T = max(t for _, t in data) + 1
    if len(data) != n * T:
        raise ValueError("scenario table is not a full scenario x slot grid")
    wind = np.array([[data[i, t][0] for t in range(T)] for i in range(n)])
    solar = np.array([[data[i, t][1] for t in range(T)] for i in range(n)])
    return ScenarioSet(n, wind, solar, seed)
