"""Exhaustive unit-commitment oracle for tiny instances.

Every commitment pattern that satisfies the minimum up/down rules is
enumerated; for each, the dispatch is found by dynamic programming over
power levels on a ``power_step`` grid with the exact quadratic fuel cost.
Flexible resources, if any, consume their baseline.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ..model import ConventionalUnit, MicrogridConfig, baseline_demand
from .core import INFEASIBLE, OPTIMAL, SolveResult

MAX_UNITS = 2
MAX_SLOTS = 6


class EnumerationLimitError(ValueError):
    pass


@dataclass
class BruteForceResult(SolveResult):
    on: np.ndarray | None = None
    p_con: np.ndarray | None = None
    pattern_costs: dict = field(default_factory=dict)  # pattern bytes -> best cost

    def runner_up_gap(self) -> float:
        """Cost gap between the best and second-best commitment patterns."""
        costs = sorted(c for c in self.pattern_costs.values() if np.isfinite(c))
        return costs[1] - costs[0] if len(costs) > 1 else math.inf


def unit_patterns(unit: ConventionalUnit, T: int) -> list[tuple[int, ...]]:
    """On/off patterns honoring min-up/min-down, off before the horizon."""
    out = []
    for bits in itertools.product((0, 1), repeat=T):
        ok = True
        t = 0
        while t < T and ok:
            s = t
            while t < T and bits[t] == bits[s]:
                t += 1
            n, at_end = t - s, t == T
            if bits[s] and not at_end and n < unit.min_up:
                ok = False
            if not bits[s] and s > 0 and not at_end and n < unit.min_down:
                ok = False
        if ok:
            out.append(bits)
    return out


def _levels(unit: ConventionalUnit, step: float) -> np.ndarray:
    n = int(round((unit.p_max - unit.p_min) / step))
    return unit.p_min + step * np.arange(n + 1)


def _transition_mask(unit, prev_on, on, prev_lv, lv):
    if prev_on and on:
        d = lv[None, :] - prev_lv[:, None]
        return (d <= unit.ramp_up + 1e-9) & (-d <= unit.ramp_down + 1e-9)
    if on:  # start-up: output limited to p_min
        return np.broadcast_to(lv[None, :] <= unit.p_min + 1e-9, (len(prev_lv), len(lv)))
    if prev_on:  # shut-down from at most p_min
        return np.broadcast_to(prev_lv[:, None] <= unit.p_min + 1e-9, (len(prev_lv), len(lv)))
    return np.ones((len(prev_lv), len(lv)), dtype=bool)


def discretization_bound(config: MicrogridConfig, power_step: float) -> float:
    """Cost change from moving every unit by one grid step in every slot."""
    h = config.grid.slot_hours
    total = 0.0
    for t in range(config.grid.slot_count):
        for g in config.units:
            total += h * (g.cost_b + 2 * g.cost_c * g.p_max + config.curtail_penalty[t]) * power_step
    return total


def brute_force_uc(config: MicrogridConfig, wind, solar, power_step: float) -> BruteForceResult:
    T = config.grid.slot_count
    L = len(config.units)
    if L > MAX_UNITS or T > MAX_SLOTS:
        raise EnumerationLimitError(f"{L} units x {T} slots exceeds {MAX_UNITS} x {MAX_SLOTS}")
    for g in config.units:
        for name in ("p_min", "p_max", "ramp_up", "ramp_down"):
            q = getattr(g, name) / power_step
            if abs(q - round(q)) > 1e-9:
                raise ValueError(f"power_step {power_step:g} does not divide {g.name}.{name}")

    h = config.grid.slot_hours
    demand = baseline_demand(config)
    avail = np.asarray(wind, dtype=float) + np.asarray(solar, dtype=float)
    gamma = np.asarray(config.curtail_penalty, dtype=float)
    units = list(config.units)
    if L == 1:  # pad with a never-used unit so the DP is always two-dimensional
        units.append(ConventionalUnit("_pad", 0, 0, 1, 1, 1, 1, 0, 0, 0, 0, 0))
    levels = [_levels(g, power_step) for g in units]
    per_unit = [unit_patterns(g, T) if g.name != "_pad" else [(0,) * T] for g in units]
    cap = np.array([g.p_max for g in config.units])

    best = BruteForceResult(INFEASIBLE)
    best_cost = math.inf
    for combo in itertools.product(*per_unit):
        on = np.array(combo[:L], dtype=int).T  # [T, L]
        if np.any(on @ cap < np.asarray(config.reserve_kw) + demand - 1e-9):
            continue
        fixed = 0.0
        for l, g in enumerate(config.units):
            prev = np.concatenate([[0], on[:-1, l]])
            fixed += g.startup_cost * np.sum((on[:, l] == 1) & (prev == 0))
            fixed += g.shutdown_cost * np.sum((on[:, l] == 0) & (prev == 1))
            fixed += g.cost_a * np.sum(on[:, l])
        cost, arg = None, []
        prev_lv = [np.zeros(1), np.zeros(1)]
        prev_on = [0, 0]
        for t in range(T):
            lv = [levels[i] if combo[i][t] else np.zeros(1) for i in range(2)]
            p1, p2 = np.meshgrid(lv[0], lv[1], indexing="ij")
            stage = np.zeros(p1.shape)
            for i, P in enumerate((p1, p2)):
                if combo[i][t]:
                    stage += h * units[i].fuel_cost(P)
            net = demand[t] - p1 - p2  # renewable energy that must be used
            feasible = (net >= -1e-9) & (net <= avail[t] + 1e-9)
            stage = np.where(feasible, stage + gamma[t] * h * (avail[t] - net), np.inf)
            m1 = _transition_mask(units[0], prev_on[0], combo[0][t], prev_lv[0], lv[0])
            m2 = _transition_mask(units[1], prev_on[1], combo[1][t], prev_lv[1], lv[1])
            if cost is None:
                start_ok = np.outer(m1[0], m2[0])
                new = np.where(start_ok, stage, np.inf)
                arg.append(None)
            else:
                # separable min over the previous state: unit 1, then unit 2
                tmp = np.where(m1[:, :, None], cost[:, None, :], np.inf)
                a1 = np.argmin(tmp, axis=0)  # [n1, n2prev]
                tmp = np.min(tmp, axis=0)
                tmp2 = np.where(m2[None, :, :], tmp[:, :, None], np.inf)
                a2 = np.argmin(tmp2, axis=1)  # [n1, n2]
                new = np.min(tmp2, axis=1) + stage
                arg.append((a1, a2))
            cost = new
            prev_lv, prev_on = lv, [combo[0][t], combo[1][t]]
        total = float(np.min(cost)) + fixed
        key = on.tobytes()
        best.pattern_costs[key] = total
        if total < best_cost - 1e-12:
            best_cost = total
            # backtrack the dispatch
            i1, i2 = np.unravel_index(int(np.argmin(cost)), cost.shape)
            p = np.zeros((T, 2))
            lvls = [[levels[i] if combo[i][t] else np.zeros(1) for t in range(T)] for i in range(2)]
            for t in range(T - 1, -1, -1):
                p[t] = (lvls[0][t][i1], lvls[1][t][i2])
                if t and arg[t] is not None:
                    a1, a2 = arg[t]
                    j2 = a2[i1, i2]
                    j1 = a1[i1, j2]
                    i1, i2 = j1, j2
            best.on, best.p_con = on.copy(), p[:, :L]

    if not np.isfinite(best_cost):
        best.status = INFEASIBLE
        return best
    best.status = OPTIMAL
    best.objective = best.bound = best_cost
    best.nodes = len(best.pattern_costs)
    return best
