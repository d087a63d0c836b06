"""MILP encodings of flexible demand resources.

Each encoder appends variables and rows to a :class:`MilpProblem` and returns
a :class:`DsmEncoding` whose ``expr[t]`` is the resource's consumption in slot
``t`` as a linear expression ``{var_index: coef}``. Consumption is identically
zero outside the availability window, and ramp / on-off rules are imposed on
the whole-horizon profile, so a narrower window is always a restriction of a
wider one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (
    EnergyType,
    FlexibleResource,
    PowerType,
    TimeGrid,
    power_start_positions,
    window_slots,
)
from .problem import EQ, GE, LE, MilpProblem


class DsmInfeasibleError(ValueError):
    """A resource cannot be scheduled under its own constraints."""


@dataclass
class DsmEncoding:
    resource_id: str
    type_name: str
    expr: list[dict[int, float]]
    d_vars: dict[int, int] = field(default_factory=dict)  # slot -> D var (energy-type)
    alpha_vars: dict[int, int] = field(default_factory=dict)  # slot -> alpha var (energy-type)
    start_vars: dict[int, int] = field(default_factory=dict)  # start slot -> binary (power-type)

    def value(self, x) -> np.ndarray:
        """Consumption profile implied by a solution vector."""
        x = np.asarray(x, dtype=float)
        return np.array([sum(a * x[j] for j, a in e.items()) for e in self.expr])


def encode_power_type(problem: MilpProblem, res: FlexibleResource, grid: TimeGrid) -> DsmEncoding:
    """Start-time selection: exactly one start binary, curve shape fixed."""
    if not isinstance(res.kind, PowerType):
        raise TypeError(f"{res.id} is not a power-type resource")
    profile = res.kind.profile
    starts = power_start_positions(len(profile), res.window, grid)
    if not starts:
        raise DsmInfeasibleError(
            f"{res.id}: profile of length {len(profile)} fits no contiguous window run"
        )
    enc = DsmEncoding(res.id, "power", [dict() for _ in grid.slots])
    for tau in starts:
        s = problem.add_var(f"start[{res.id},t={tau}]", binary=True)
        enc.start_vars[tau] = s
        for k, p in enumerate(profile):
            enc.expr[tau + k][s] = float(p)
    problem.add_row({s: 1.0 for s in enc.start_vars.values()}, EQ, 1.0, f"one_start[{res.id}]")
    return enc


def encode_energy_type(problem: MilpProblem, res: FlexibleResource, grid: TimeGrid) -> DsmEncoding:
    """Box, ramp, minimum-off and maximum-on constraints for a free-shape load."""
    if not isinstance(res.kind, EnergyType):
        raise TypeError(f"{res.id} is not an energy-type resource")
    k: EnergyType = res.kind
    slots = window_slots(res.window, grid)
    T = grid.slot_count
    need = float(np.sum(res.baseline))
    if need > k.d_max * len(slots) + 1e-9:
        raise DsmInfeasibleError(
            f"{res.id}: baseline energy {need:g} exceeds d_max * |window| = {k.d_max * len(slots):g}"
        )

    enc = DsmEncoding(res.id, "energy", [dict() for _ in grid.slots])
    for t in slots:
        d = problem.add_var(f"D[{res.id},t={t}]", 0.0, k.d_max)
        a = problem.add_var(f"alpha[{res.id},t={t}]", binary=True)
        enc.d_vars[t], enc.alpha_vars[t] = d, a
        enc.expr[t][d] = 1.0
        problem.add_row({d: 1.0, a: -k.d_min}, GE, 0.0, f"dsm_min[{res.id},t={t}]")
        problem.add_row({d: 1.0, a: -k.d_max}, LE, 0.0, f"dsm_max[{res.id},t={t}]")

    D, A = enc.d_vars, enc.alpha_vars
    for t in range(1, T):
        if t not in D and t - 1 not in D:
            continue
        up: dict[int, float] = {}
        if t in D:
            up[D[t]] = 1.0
        if t - 1 in D:
            up[D[t - 1]] = -1.0
        problem.add_row(up, LE, k.ramp_up, f"dsm_ramp_up[{res.id},t={t}]")
        problem.add_row({j: -c for j, c in up.items()}, LE, k.ramp_down, f"dsm_ramp_down[{res.id},t={t}]")

    # once switched off at t, stay off for min_off slots (clipped at the horizon end)
    for t in range(1, T):
        if t - 1 not in A:
            continue
        for kk in range(t + 1, min(t + k.min_off, T)):
            if kk not in A:
                continue
            row = {A[t - 1]: 1.0, A[kk]: 1.0}
            if t in A:
                row[A[t]] = -1.0
            problem.add_row(row, LE, 1.0, f"dsm_min_off[{res.id},t={t},k={kk}]")

    # no on-run longer than max_on: every (max_on+1)-slot span has an off slot
    if k.max_on is not None:
        for t in range(k.max_on, T):
            span = [A[j] for j in range(t - k.max_on, t + 1) if j in A]
            if len(span) > k.max_on:
                problem.add_row({j: 1.0 for j in span}, LE, float(k.max_on), f"dsm_max_on[{res.id},t={t}]")
    return enc


def encode_resource(problem: MilpProblem, res: FlexibleResource, grid: TimeGrid) -> DsmEncoding:
    if isinstance(res.kind, PowerType):
        return encode_power_type(problem, res, grid)
    return encode_energy_type(problem, res, grid)


def encode_energy_neutral(problem: MilpProblem, enc: DsmEncoding, res: FlexibleResource,
                          reduction_ratio: float = 0.0) -> int:
    """Total consumption equals ``(1 - r)`` times the baseline total."""
    if not 0 <= reduction_ratio < 1:
        raise ValueError("reduction ratio must lie in [0, 1)")
    if enc.type_name == "power" and reduction_ratio > 0:
        raise ValueError(f"{res.id}: a fixed-curve resource cannot reduce its consumption")
    row: dict[int, float] = {}
    for e in enc.expr:
        for j, a in e.items():
            row[j] = row.get(j, 0.0) + a
    target = (1.0 - reduction_ratio) * float(np.sum(res.baseline))
    return problem.add_row(row, EQ, target, f"energy_neutral[{res.id}]")


def controllable_capacity(resources, rule: str, sol) -> float:
    """Participating capacity (kW) used as the divisor of the compensation.

    ``peak_shift`` sums each resource's largest absolute deviation from its
    baseline in ``sol``; ``baseline_peak`` sums each baseline maximum.
    """
    resources = list(resources)
    if not resources:
        return 0.0
    total = 0.0
    for res in resources:
        if rule == "peak_shift":
            total += float(np.max(np.abs(sol.dsm_delta[res.id])))
        elif rule == "baseline_peak":
            total += float(np.max(res.baseline))
        else:
            raise ValueError(f"unknown capacity rule {rule!r}")
    return total
