"""Unit-commitment MILP for one renewable scenario, with or without DSM.

The quadratic fuel cost is replaced by secant lines of the convex curve; a
cost variable ``k[t,l]`` lies above every line scaled by the on-status
(``k >= slope * P + intercept * o``), which is exact at breakpoints and costs
nothing when the unit is off.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import dsm
from .model import ConventionalUnit, FlexibleResource, MicrogridConfig, PowerType, window_slots
from .problem import EQ, GE, LE, MilpProblem

FEAS_TOL = 1e-6
INT_TOL = 1e-6


class InfeasibleModelError(ValueError):
    """The instance has no feasible schedule (detected before or by solving)."""


class DecodeError(ValueError):
    pass


def pwl_cost(unit: ConventionalUnit, segments: int) -> list[tuple[float, float]]:
    """Secant ``(slope, intercept)`` lines of ``b*P + c*P^2`` on ``[p_min, p_max]``.

    The maximum over the lines over-estimates the curve by at most
    ``c * h**2 / 4`` with ``h = (p_max - p_min) / segments``.
    """
    if segments < 1:
        raise ValueError("segments must be >= 1")
    if unit.p_max <= unit.p_min:
        return [(0.0, float(unit.fuel_cost(unit.p_max)))]
    if unit.cost_c == 0:
        return [(unit.cost_b, 0.0)]
    pts = np.linspace(unit.p_min, unit.p_max, segments + 1)
    lines = []
    for p0, p1 in zip(pts[:-1], pts[1:]):
        slope = unit.cost_b + unit.cost_c * (p0 + p1)
        lines.append((float(slope), float(-unit.cost_c * p0 * p1)))
    return lines


def pwl_error_bound(unit: ConventionalUnit, segments: int) -> float:
    if unit.p_max <= unit.p_min:
        return 0.0
    h = (unit.p_max - unit.p_min) / segments
    return unit.cost_c * h * h / 4.0


def pwl_eval(lines, p: float) -> float:
    return max(s * p + c for s, c in lines)


def _dispatchable(config: MicrogridConfig, dsm_enabled: bool, flexible_ids) -> list[FlexibleResource]:
    if not dsm_enabled:
        return []
    if flexible_ids is None:
        return list(config.flexible)
    ids = set(flexible_ids)
    unknown = ids - {r.id for r in config.flexible}
    if unknown:
        raise KeyError(f"unknown flexible resources: {sorted(unknown)}")
    return [r for r in config.flexible if r.id in ids]


def build_uc(config: MicrogridConfig, wind, solar, dsm_enabled: bool = False, *,
             flexible_ids=None, reduction_ratio: float | None = None,
             segments: int | None = None) -> MilpProblem:
    """Build the scenario MILP.

    With ``dsm_enabled`` the resources in ``flexible_ids`` (all resources when
    None) become decision variables; every other flexible resource consumes
    its baseline.
    """
    T = config.grid.slot_count
    h = config.grid.slot_hours
    wind = np.asarray(wind, dtype=float)
    solar = np.asarray(solar, dtype=float)
    if wind.shape != (T,) or solar.shape != (T,):
        raise ValueError(f"renewable profiles must have {T} entries")
    segments = config.pwl_segments if segments is None else segments
    r = config.reduction_ratio if reduction_ratio is None else reduction_ratio
    flex = _dispatchable(config, dsm_enabled, flexible_ids)
    flex_ids = {res.id for res in flex}

    fixed = np.array(config.inflexible_load, dtype=float)
    for res in config.flexible:
        if res.id not in flex_ids:
            fixed = fixed + np.asarray(res.baseline, dtype=float)
    cap = sum(u.p_max for u in config.units)
    for t in range(T):
        if fixed[t] > cap + wind[t] + solar[t] + 1e-9:
            raise InfeasibleModelError(f"slot {t}: demand {fixed[t]:g} exceeds available supply")
        if config.reserve_kw[t] + fixed[t] > cap + 1e-9:
            raise InfeasibleModelError(f"slot {t}: reserve cannot be met even with all units on")

    prob = MilpProblem()
    L = len(config.units)
    o = np.zeros((T, L), dtype=int)
    u = np.zeros((T, L), dtype=int)
    v = np.zeros((T, L), dtype=int)
    p = np.zeros((T, L), dtype=int)
    k = np.zeros((T, L), dtype=int)
    for t in range(T):
        for l, g in enumerate(config.units):
            o[t, l] = prob.add_var(f"o[t={t},l={l}]", binary=True, obj=g.cost_a)
            u[t, l] = prob.add_var(f"u[t={t},l={l}]", binary=True, obj=g.startup_cost)
            v[t, l] = prob.add_var(f"v[t={t},l={l}]", binary=True, obj=g.shutdown_cost)
            p[t, l] = prob.add_var(f"P_con[t={t},l={l}]", 0.0, g.p_max)
            k[t, l] = prob.add_var(f"fuel[t={t},l={l}]", 0.0, float(g.fuel_cost(g.p_max)), obj=h)
    pw = [prob.add_var(f"P_wind[t={t}]", 0.0, wind[t]) for t in range(T)]
    ps = [prob.add_var(f"P_solar[t={t}]", 0.0, solar[t]) for t in range(T)]
    e = [prob.add_var(f"E[t={t}]", 0.0, wind[t] + solar[t], obj=config.curtail_penalty[t] * h)
         for t in range(T)]

    for l, g in enumerate(config.units):
        lines = pwl_cost(g, segments)
        for t in range(T):
            prob.add_row({p[t, l]: 1.0, o[t, l]: -g.p_min}, GE, 0.0, f"cap_min[t={t},l={l}]")
            prob.add_row({p[t, l]: 1.0, o[t, l]: -g.p_max}, LE, 0.0, f"cap_max[t={t},l={l}]")
            for s, (slope, icpt) in enumerate(lines):
                prob.add_row({k[t, l]: 1.0, p[t, l]: -slope, o[t, l]: -icpt}, GE, 0.0,
                             f"fuel_pwl[t={t},l={l},s={s}]")
            prev_o = o[t - 1, l] if t > 0 else None
            prev_p = p[t - 1, l] if t > 0 else None

            def lin(*terms):
                row: dict[int, float] = {}
                for idx, c in terms:
                    if idx is not None:
                        row[idx] = row.get(idx, 0.0) + c
                return row

            # start/stop logic; units are off before the horizon
            prob.add_row(lin((prev_o, 1.0), (o[t, l], -1.0), (v[t, l], -1.0)), LE, 0.0, f"stop[t={t},l={l}]")
            prob.add_row(lin((prev_o, -1.0), (o[t, l], 1.0), (u[t, l], -1.0)), LE, 0.0, f"start[t={t},l={l}]")
            # minimum up / down, rolling-window form, clipped at the horizon end
            for kk in range(t + 1, min(t + g.min_up, T)):
                prob.add_row(lin((prev_o, -1.0), (o[t, l], 1.0), (o[kk, l], -1.0)), LE, 0.0,
                             f"min_up[t={t},l={l},k={kk}]")
            if prev_o is not None:
                for kk in range(t + 1, min(t + g.min_down, T)):
                    prob.add_row({prev_o: 1.0, o[t, l]: -1.0, o[kk, l]: 1.0}, LE, 1.0,
                                 f"min_down[t={t},l={l},k={kk}]")
            # ramping with start-up / shut-down allowances; P(-1) = 0, o(-1) = 0
            # P_t - P_{t-1} <= (2 - o_{t-1} - o_t) Pmin + (1 + o_{t-1} - o_t) RU
            prob.add_row(lin((p[t, l], 1.0), (prev_p, -1.0), (prev_o, g.p_min - g.ramp_up),
                             (o[t, l], g.p_min + g.ramp_up)), LE, 2 * g.p_min + g.ramp_up,
                         f"ramp_up[t={t},l={l}]")
            # P_{t-1} - P_t <= (2 - o_{t-1} - o_t) Pmin + (1 - o_{t-1} + o_t) RD
            prob.add_row(lin((prev_p, 1.0), (p[t, l], -1.0), (prev_o, g.p_min + g.ramp_down),
                             (o[t, l], g.p_min - g.ramp_down)), LE, 2 * g.p_min + g.ramp_down,
                         f"ramp_down[t={t},l={l}]")

    encodings = []
    for res in flex:
        enc = dsm.encode_resource(prob, res, config.grid)
        dsm.encode_energy_neutral(prob, enc, res, r if enc.type_name == "energy" else 0.0)
        encodings.append(enc)

    for t in range(T):
        bal = {p[t, l]: 1.0 for l in range(L)}
        bal[pw[t]] = 1.0
        bal[ps[t]] = 1.0
        res_row = {o[t, l]: config.units[l].p_max for l in range(L)}
        for enc in encodings:
            for j, a in enc.expr[t].items():
                bal[j] = bal.get(j, 0.0) - a
                res_row[j] = res_row.get(j, 0.0) - a
        prob.add_row(bal, EQ, fixed[t], f"balance[t={t}]")
        prob.add_row({e[t]: 1.0, pw[t]: 1.0, ps[t]: 1.0}, EQ, wind[t] + solar[t], f"curtail[t={t}]")
        prob.add_row(res_row, GE, config.reserve_kw[t] + fixed[t], f"reserve[t={t}]")

    prob.meta.update(
        o=o, u=u, v=v, p=p, k=k, pw=np.array(pw), ps=np.array(ps), e=np.array(e),
        encodings=encodings, fixed_demand=fixed, reduction_ratio=r, segments=segments,
    )
    return prob


@dataclass
class DispatchSolution:
    on: np.ndarray  # [T, L] 0/1
    start: np.ndarray
    stop: np.ndarray
    p_con: np.ndarray  # [T, L] kW
    wind_used: np.ndarray
    solar_used: np.ndarray
    curtailed: np.ndarray
    demand: np.ndarray  # total served demand per slot
    dsm_power: dict[str, np.ndarray] = field(default_factory=dict)
    dsm_on: dict[str, np.ndarray] = field(default_factory=dict)
    dsm_delta: dict[str, np.ndarray] = field(default_factory=dict)
    reduction_ratio: float = 0.0
    objective: float = 0.0  # surrogate (piecewise-linear) objective
    cost_fuel: float = 0.0  # true quadratic fuel plus on-cost a
    cost_startstop: float = 0.0
    cost_penalty: float = 0.0

    @property
    def cost_total(self) -> float:
        return self.cost_fuel + self.cost_startstop + self.cost_penalty

    def cost_summary(self) -> dict:
        # "+ 0.0" turns -0.0 into 0.0
        return {
            "cost_total": round(self.cost_total, 4) + 0.0,
            "cost_fuel": round(self.cost_fuel, 4) + 0.0,
            "cost_startstop": round(self.cost_startstop, 4) + 0.0,
            "cost_penalty": round(self.cost_penalty, 4) + 0.0,
            "objective_pwl": round(self.objective, 4) + 0.0,
        }


def true_costs(config: MicrogridConfig, on, start, stop, p_con, curtailed) -> tuple[float, float, float]:
    """(fuel incl. on-cost, start/stop, curtailment penalty) with the exact quadratic."""
    h = config.grid.slot_hours
    fuel = startstop = 0.0
    for l, g in enumerate(config.units):
        fuel += float(np.sum(on[:, l] * g.cost_a + h * g.fuel_cost(p_con[:, l])))
        startstop += float(np.sum(start[:, l]) * g.startup_cost + np.sum(stop[:, l]) * g.shutdown_cost)
    penalty = float(np.sum(np.asarray(config.curtail_penalty) * curtailed) * h)
    return fuel, startstop, penalty


def decode(problem: MilpProblem, raw, config: MicrogridConfig, wind, solar) -> DispatchSolution:
    """Turn solver values into a checked :class:`DispatchSolution`."""
    x = np.asarray(raw, dtype=float)
    if x.shape != (problem.n_vars,):
        raise DecodeError(f"expected {problem.n_vars} values, got {x.shape}")
    bad = problem.integrality_violations(x, INT_TOL)
    if bad:
        raise DecodeError(f"binary value not integral: {bad[0][0]}={x[problem.index(bad[0][0])]:g}")
    viol = problem.violations(x, FEAS_TOL)
    if viol:
        raise DecodeError(f"constraint {viol[0][0]} violated by {viol[0][1]:.3g}")
    m = problem.meta
    xb = np.clip(x, problem.lb, problem.ub)  # drop solver noise such as -1e-15
    for j, is_bin in enumerate(problem.binary):
        if is_bin:
            xb[j] = round(xb[j])
    on, start, stop = (np.rint(xb[m[key]]).astype(int) for key in ("o", "u", "v"))
    p_con = np.clip(xb[m["p"]], 0.0, None)
    wind_used, solar_used, curtailed = xb[m["pw"]], xb[m["ps"]], xb[m["e"]]

    demand = np.array(m["fixed_demand"], dtype=float)
    dsm_power, dsm_on, dsm_delta = {}, {}, {}
    by_id = {r.id: r for r in config.flexible}
    for enc in m["encodings"]:
        d = enc.value(xb)
        d[np.abs(d) < 1e-12] = 0.0
        res = by_id[enc.resource_id]
        dsm_power[res.id] = d
        if enc.alpha_vars:
            alpha = np.zeros(config.grid.slot_count, dtype=int)
            for t, j in enc.alpha_vars.items():
                alpha[t] = int(xb[j])
        else:
            alpha = (d > 0).astype(int)
        dsm_on[res.id] = alpha
        dsm_delta[res.id] = d - np.asarray(res.baseline, dtype=float)
        demand = demand + d

    fuel, startstop, penalty = true_costs(config, on, start, stop, p_con, curtailed)
    return DispatchSolution(
        on=on, start=start, stop=stop, p_con=p_con,
        wind_used=wind_used, solar_used=solar_used, curtailed=curtailed, demand=demand,
        dsm_power=dsm_power, dsm_on=dsm_on, dsm_delta=dsm_delta,
        reduction_ratio=m["reduction_ratio"], objective=problem.objective_value(xb),
        cost_fuel=fuel, cost_startstop=startstop, cost_penalty=penalty,
    )


@dataclass
class Violation:
    constraint: str
    slot: int
    who: str  # unit name or resource id, "" for system-wide rows
    amount: float

    def __str__(self):
        who = f" {self.who}" if self.who else ""
        return f"{self.constraint} at t={self.slot}{who}: {self.amount:.3g}"


def check_schedule(sol: DispatchSolution, config: MicrogridConfig, wind, solar,
                   tol: float = FEAS_TOL) -> list[Violation]:
    """Re-check every operating constraint directly on a schedule.

    Independent of the MILP rows: each rule is evaluated from its plain
    definition. An empty list means the schedule is valid.
    """
    out: list[Violation] = []
    T = config.grid.slot_count
    wind = np.asarray(wind, dtype=float)
    solar = np.asarray(solar, dtype=float)

    def flag(name, t, who, amount):
        if amount > tol:
            out.append(Violation(name, t, who, float(amount)))

    for l, g in enumerate(config.units):
        on, p = sol.on[:, l], sol.p_con[:, l]
        for t in range(T):
            flag("capacity_min", t, g.name, on[t] * g.p_min - p[t])
            flag("capacity_max", t, g.name, p[t] - on[t] * g.p_max)
            prev_on = on[t - 1] if t else 0
            prev_p = p[t - 1] if t else 0.0
            flag("startup_flag", t, g.name, (on[t] - prev_on) - sol.start[t, l])
            flag("shutdown_flag", t, g.name, (prev_on - on[t]) - sol.stop[t, l])
            if on[t] and prev_on:
                flag("ramp_up", t, g.name, p[t] - prev_p - g.ramp_up)
                flag("ramp_down", t, g.name, prev_p - p[t] - g.ramp_down)
            elif on[t] and not prev_on:
                flag("startup_ramp", t, g.name, p[t] - g.p_min)
            elif prev_on and not on[t]:
                flag("shutdown_ramp", t, g.name, prev_p - g.p_min)
        # run lengths: a run that starts inside the horizon must last the
        # minimum time or reach the horizon end
        t = 0
        while t < T:
            s = t
            while t < T and on[t] == on[s]:
                t += 1
            length, reaches_end = t - s, t == T
            if on[s] and not reaches_end and length < g.min_up:
                flag("min_up", s, g.name, g.min_up - length)
            if not on[s] and s > 0 and not reaches_end and length < g.min_down:
                flag("min_down", s, g.name, g.min_down - length)

    by_id = {r.id: r for r in config.flexible}
    demand = np.array(config.inflexible_load, dtype=float)
    for res in config.flexible:
        demand = demand + (sol.dsm_power[res.id] if res.id in sol.dsm_power else np.asarray(res.baseline))
    for t in range(T):
        supply = sol.p_con[t].sum() + sol.wind_used[t] + sol.solar_used[t]
        flag("balance", t, "", abs(supply - demand[t]))
        flag("wind_bounds", t, "", max(-sol.wind_used[t], sol.wind_used[t] - wind[t]))
        flag("solar_bounds", t, "", max(-sol.solar_used[t], sol.solar_used[t] - solar[t]))
        flag("curtailment", t, "", abs(sol.curtailed[t] - (wind[t] + solar[t] - sol.wind_used[t] - sol.solar_used[t])))
        flag("curtailment_sign", t, "", -sol.curtailed[t])
        committed = sum(sol.on[t, l] * g.p_max for l, g in enumerate(config.units))
        flag("reserve", t, "", config.reserve_kw[t] + demand[t] - committed)

    for rid, d in sol.dsm_power.items():
        res = by_id[rid]
        out.extend(_check_resource(res, d, sol.dsm_on.get(rid), sol.reduction_ratio, config, tol))
    return out


def _check_resource(res: FlexibleResource, d, alpha, r: float, config: MicrogridConfig, tol: float):
    from .model import onoff_pattern_ok, place_profile, power_start_positions

    out = []
    T = config.grid.slot_count
    inside = set(window_slots(res.window, config.grid))

    def flag(name, t, amount):
        if amount > tol:
            out.append(Violation(name, t, res.id, float(amount)))

    for t in range(T):
        if t not in inside:
            flag("window", t, abs(d[t]))
    base_total = float(np.sum(res.baseline))
    if isinstance(res.kind, PowerType):
        fits = [
            s for s in power_start_positions(len(res.kind.profile), res.window, config.grid)
            if np.allclose(place_profile(res.kind.profile, s, T), d, atol=tol)
        ]
        if not fits:
            flag("power_curve", 0, float(np.max(np.abs(d - np.asarray(res.baseline)))) + tol * 2)
        flag("energy_neutral", 0, abs(float(np.sum(d)) - base_total) - tol * max(1.0, base_total))
        return out
    k = res.kind
    alpha = np.asarray(alpha if alpha is not None else (d > tol), dtype=int)
    for t in range(T):
        flag("dsm_min", t, alpha[t] * k.d_min - d[t])
        flag("dsm_max", t, d[t] - alpha[t] * k.d_max)
        if t:
            flag("dsm_ramp_up", t, d[t] - d[t - 1] - k.ramp_up)
            flag("dsm_ramp_down", t, d[t - 1] - d[t] - k.ramp_down)
    if not onoff_pattern_ok(alpha, k.min_off, k.max_on):
        flag("dsm_on_off", 0, 1.0)
    target = (1 - r) * base_total
    flag("energy_neutral", 0, abs(float(np.sum(d)) - target) - tol * max(1.0, base_total))
    return out


# -- export --------------------------------------------------------------------

def solution_csv(sol: DispatchSolution, config: MicrogridConfig) -> str:
    """Three CSV blocks separated by blank lines: units, renewables, DSM."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["slot", "unit", "on", "p_kw"])
    for t in range(config.grid.slot_count):
        for l, g in enumerate(config.units):
            w.writerow([t, g.name, int(sol.on[t, l]), f"{sol.p_con[t, l]:.3f}"])
    buf.write("\n")
    w.writerow(["slot", "wind_used", "solar_used", "curtailed"])
    for t in range(config.grid.slot_count):
        w.writerow([t, f"{sol.wind_used[t]:.3f}", f"{sol.solar_used[t]:.3f}", f"{sol.curtailed[t]:.3f}"])
    buf.write("\n")
    w.writerow(["slot", "resource", "alpha", "d_kw", "delta_kw"])
    for rid in sol.dsm_power:
        for t in range(config.grid.slot_count):
            w.writerow([t, rid, int(sol.dsm_on[rid][t]), f"{sol.dsm_power[rid][t]:.3f}",
                        f"{sol.dsm_delta[rid][t]:.3f}"])
    return buf.getvalue().replace("-0.000", "0.000")


def cost_json(sol: DispatchSolution) -> str:
    return json.dumps(sol.cost_summary(), indent=2) + "\n"
