"""Scenario-based pricing of flexible-demand groups.

For every scenario the operating cost is minimized twice, without DSM and
with one resource group dispatchable; the difference is that scenario's
benefit. Benefits are sorted and the ``ceil((1 - eps) * N)``-th largest is
paid out per kW of controllable capacity.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dsm import controllable_capacity
from .model import EnergyType, FlexibleResource, MicrogridConfig, PowerType, group_label, parse_group
from .scenario import ScenarioSet, scenario_slice
from .solver import INFEASIBLE, SolveOptions, solve_milp
from .ucopt import InfeasibleModelError, build_uc, check_schedule, decode


class PricingError(RuntimeError):
    pass


class SolverLimitError(PricingError):
    """A subproblem stopped on a node or time limit (strict mode)."""


@dataclass(frozen=True)
class BenefitSample:
    scenario_index: int
    cost_without: float  # optimal piecewise-linear objective, no DSM
    cost_with: float
    benefit: float
    capacity: float
    true_cost_without: float = math.nan  # same schedules under the exact quadratic
    true_cost_with: float = math.nan
    usable: bool = True
    status: str = "optimal"
    # a-posteriori audit of the schedules behind this sample
    violations: int = 0
    balance_residual: float = 0.0  # kW, worst slot
    neutral_residual: float = 0.0  # relative to the baseline energy, worst resource
    delta: tuple[float, ...] = ()  # group's total load shift per slot (kW)


@dataclass(frozen=True)
class PricingResult:
    samples: tuple[BenefitSample, ...]
    selected_index: int
    selected_rank: int
    selected_benefit: float
    selected_capacity: float
    pi: float
    epsilon: float
    resource_group: tuple[str, str]
    dropped: tuple[int, ...] = ()

    @property
    def n(self) -> int:
        return len(self.samples) - len(self.dropped)

    def coverage(self) -> int:
        """Scenarios whose benefit reaches the selected level."""
        return sum(1 for s in self.samples if s.usable and s.benefit >= self.selected_benefit)


def group_config(config: MicrogridConfig, group) -> MicrogridConfig:
    """The case with only ``group``'s resources present (``None``: no resources)."""
    if group is None:
        return config.replace(flexible=())
    return config.replace(flexible=config.group_resources(group))


# -- per-scenario evaluation -----------------------------------------------------

def _solve(config, wind, solar, dsm_enabled, opts, i, reduction_ratio=None):
    problem = build_uc(config, wind, solar, dsm_enabled, reduction_ratio=reduction_ratio)
    res = solve_milp(problem, opts)
    if res.status == INFEASIBLE:
        kind = "with" if dsm_enabled else "without"
        raise InfeasibleModelError(f"scenario {i}: problem {kind} DSM is infeasible")
    if not res.ok:
        return res, None
    return res, decode(problem, res.values, config, wind, solar)


def audit(sol, config: MicrogridConfig, wind, solar) -> tuple[int, float, float]:
    """(violation count, balance residual, relative energy-neutral residual)."""
    count = len(check_schedule(sol, config, wind, solar))
    supply = sol.p_con.sum(axis=1) + sol.wind_used + sol.solar_used
    balance = float(np.max(np.abs(supply - sol.demand)))
    neutral = 0.0
    for res in config.flexible:
        if res.id in sol.dsm_power:
            base = float(np.sum(res.baseline))
            target = (1.0 - (sol.reduction_ratio if res.type_name == "energy" else 0.0)) * base
            neutral = max(neutral, abs(float(np.sum(sol.dsm_power[res.id])) - target) / max(base, 1e-12))
    return count, balance, neutral


def benefit_for_scenario(config: MicrogridConfig, scenarios: ScenarioSet, i: int, group,
                         opts: SolveOptions | None = None, *, reduction_ratio: float | None = None,
                         without: tuple[float, float] | None = None) -> BenefitSample:
    """Paired solves on scenario ``i`` for one resource group.

    ``without`` may carry a precomputed ``(objective, true cost)`` of the
    no-DSM problem, which does not depend on the group's flexibility.
    """
    opts = opts or SolveOptions()
    case = group_config(config, group)
    wind, solar = scenario_slice(scenarios, i)
    checks = [(0, 0.0, 0.0)]
    if without is None:
        res0, sol0 = _solve(case, wind, solar, False, opts, i)
        if sol0 is None:
            return BenefitSample(i, math.nan, math.nan, math.nan, math.nan, usable=False, status=res0.status)
        without = (sol0.objective, sol0.cost_total)
        checks.append(audit(sol0, case, wind, solar))
    res1, sol1 = _solve(case, wind, solar, True, opts, i, reduction_ratio)
    if sol1 is None:
        return BenefitSample(i, without[0], math.nan, math.nan, math.nan, without[1],
                             usable=False, status=res1.status)
    checks.append(audit(sol1, case, wind, solar))
    capacity = controllable_capacity(case.flexible, case.capacity_rule, sol1)
    return BenefitSample(i, without[0], sol1.objective, without[0] - sol1.objective, capacity,
                         without[1], sol1.cost_total,
                         violations=sum(c[0] for c in checks),
                         balance_residual=max(c[1] for c in checks),
                         neutral_residual=max(c[2] for c in checks),
                         delta=tuple(float(v) for v in sum(sol1.dsm_delta.values(), np.zeros(len(wind)))))


def no_dsm_cost(config: MicrogridConfig, scenarios: ScenarioSet, i: int, group,
                opts: SolveOptions | None = None) -> tuple[float, float] | None:
    case = group_config(config, group)
    wind, solar = scenario_slice(scenarios, i)
    _, sol = _solve(case, wind, solar, False, opts or SolveOptions(), i)
    return None if sol is None else (sol.objective, sol.cost_total)


def _task(args):
    config, scenarios, i, group, opts, r, without = args
    return benefit_for_scenario(config, scenarios, i, group, opts, reduction_ratio=r, without=without)


def default_jobs() -> int:
    return os.cpu_count() or 1


def evaluate(config: MicrogridConfig, scenarios: ScenarioSet, group, opts: SolveOptions | None = None,
             jobs: int = 1, reduction_ratio: float | None = None, without=None) -> list[BenefitSample]:
    """All N benefit samples, in scenario order, optionally on a process pool."""
    opts = opts or SolveOptions()
    without = without or [None] * scenarios.n
    tasks = [(config, scenarios, i, group, opts, reduction_ratio, without[i]) for i in range(scenarios.n)]
    if jobs <= 1 or scenarios.n == 1:
        return [_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


# -- order-statistic selection --------------------------------------------------

def selection_rank(n: int, epsilon: float) -> int:
    """1-based rank ``ceil((1 - eps) * n)`` in the descending sort, at least 1."""
    if n < 1:
        raise PricingError("no usable scenarios")
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must lie in [0, 1)")
    # round first so that (1 - 0.15) * 100 = 85.00000000000001 gives 85
    return min(n, max(1, math.ceil(round((1.0 - epsilon) * n, 9))))


def sort_descending(samples) -> list[BenefitSample]:
    return sorted(samples, key=lambda s: (-s.benefit, s.scenario_index))


def select(samples, epsilon: float, group, share_factor: float = 1.0, strict: bool = True) -> PricingResult:
    samples = tuple(samples)
    bad = tuple(s.scenario_index for s in samples if not s.usable)
    if bad and strict:
        raise SolverLimitError(f"scenario {bad[0]} hit a solver limit ({len(bad)} unusable samples)")
    usable = [s for s in samples if s.usable]
    ranked = sort_descending(usable)
    rank = selection_rank(len(ranked), epsilon)
    chosen = ranked[rank - 1]
    if not chosen.capacity > 0:
        raise PricingError(
            f"selected scenario {chosen.scenario_index} has zero controllable capacity; compensation undefined"
        )
    pi = chosen.benefit / chosen.capacity * share_factor
    return PricingResult(samples, chosen.scenario_index, rank, chosen.benefit, chosen.capacity, pi,
                         epsilon, parse_group(group) if group is not None else ("", ""), bad)


def price(config: MicrogridConfig, scenarios: ScenarioSet, group, opts: SolveOptions | None = None,
          *, jobs: int = 1, strict: bool = True, epsilon: float | None = None) -> PricingResult:
    samples = evaluate(config, scenarios, group, opts, jobs)
    eps = config.epsilon if epsilon is None else epsilon
    return select(samples, eps, group, config.share_factor, strict)


# -- sweeps ---------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    value: float  # confidence level, DSM proportion or reduction ratio
    selected_index: int
    selected_benefit: float
    selected_capacity: float
    pi: float
    samples: tuple[BenefitSample, ...] = field(default=(), repr=False)


def sweep_confidence(config: MicrogridConfig, scenarios: ScenarioSet, group, levels,
                     opts: SolveOptions | None = None, *, jobs: int = 1, strict: bool = True,
                     samples=None) -> list[SweepPoint]:
    """Re-select on one sample list for each confidence level ``beta = 1 - eps``."""
    levels = list(levels)
    if any(not 0 < b <= 1 for b in levels):
        raise ValueError("confidence levels must lie in (0, 1]")
    samples = samples if samples is not None else evaluate(config, scenarios, group, opts, jobs)
    out = []
    for beta in levels:
        r = select(samples, 1.0 - beta, group, config.share_factor, strict)
        out.append(SweepPoint(beta, r.selected_index, r.selected_benefit, r.selected_capacity, r.pi))
    return out


def scale_resource(res: FlexibleResource, k: float) -> FlexibleResource:
    baseline = tuple(k * v for v in res.baseline)
    if isinstance(res.kind, PowerType):
        kind = PowerType(tuple(k * v for v in res.kind.profile))
    else:
        e = res.kind
        kind = EnergyType(k * e.d_min, k * e.d_max, k * e.ramp_up, k * e.ramp_down, e.min_off, e.max_on)
    return dataclasses.replace(res, kind=kind, baseline=baseline)


def scaled_config(config: MicrogridConfig, group, proportion: float) -> MicrogridConfig:
    """Only ``group``'s resources, scaled from ``flexible_share`` to ``proportion``.

    Total baseline demand is held fixed: the added (or removed) flexible
    baseline is taken from (or returned to) the inflexible load, so a larger
    share means more of the same demand is controllable.
    """
    if not 0 < proportion < 1:
        raise ValueError("proportion must lie in (0, 1)")
    k = proportion / config.flexible_share
    resources = config.group_resources(group)
    base = np.zeros(config.grid.slot_count)
    for res in resources:
        base += np.asarray(res.baseline, dtype=float)
    inflexible = np.asarray(config.inflexible_load, dtype=float) - (k - 1.0) * base
    if np.any(inflexible < -1e-9):
        t = int(np.argmin(inflexible))
        raise InfeasibleModelError(
            f"share {proportion:g} needs {(k - 1) * base[t]:g} kW of flexible baseline at slot {t} "
            f"but the inflexible load is only {config.inflexible_load[t]:g} kW"
        )
    return config.replace(
        flexible=tuple(scale_resource(r, k) for r in resources),
        inflexible_load=tuple(float(v) for v in np.clip(inflexible, 0.0, None)),
    )


def sweep_scale(config: MicrogridConfig, scenarios: ScenarioSet, group, proportions,
                opts: SolveOptions | None = None, *, jobs: int = 1, strict: bool = True) -> list[SweepPoint]:
    out = []
    for prop in proportions:
        case = scaled_config(config, group, prop)
        r = price(case, scenarios, group, opts, jobs=jobs, strict=strict)
        out.append(SweepPoint(prop, r.selected_index, r.selected_benefit, r.selected_capacity, r.pi, r.samples))
    return out


def sweep_reduction(config: MicrogridConfig, scenarios: ScenarioSet, group, ratios,
                    opts: SolveOptions | None = None, *, jobs: int = 1, strict: bool = True) -> list[SweepPoint]:
    """Re-price with total consumption cut to ``(1 - r)`` of the baseline.

    The no-DSM costs are shared by every ratio and solved once.
    """
    ratios = list(ratios)
    if any(not 0 <= r < 1 for r in ratios):
        raise ValueError("reduction ratios must lie in [0, 1)")
    if any(r > 0 for r in ratios) and any(
            isinstance(res.kind, PowerType) for res in config.group_resources(group)):
        raise ValueError(f"group {group_label(parse_group(group))} has fixed-curve resources; "
                         "their consumption cannot be reduced")
    opts = opts or SolveOptions()
    without = [no_dsm_cost(config, scenarios, i, group, opts) for i in range(scenarios.n)]
    out = []
    for r in ratios:
        samples = evaluate(config, scenarios, group, opts, jobs, reduction_ratio=r, without=without)
        res = select(samples, config.epsilon, group, config.share_factor, strict)
        out.append(SweepPoint(r, res.selected_index, res.selected_benefit, res.selected_capacity, res.pi,
                              res.samples))
    return out


# -- output ---------------------------------------------------------------------

def _money(v: float) -> str:
    return "nan" if not np.isfinite(v) else f"{v:.4f}"


def _power(v: float) -> str:
    return "nan" if not np.isfinite(v) else f"{v:.3f}"


def benefits_csv(result: PricingResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "cost_without", "cost_with", "benefit", "capacity",
                "true_cost_without", "true_cost_with", "status"])
    for s in result.samples:
        w.writerow([s.scenario_index, _money(s.cost_without), _money(s.cost_with), _money(s.benefit),
                    _power(s.capacity), _money(s.true_cost_without), _money(s.true_cost_with), s.status])
    return buf.getvalue()


def pricing_json(result: PricingResult) -> str:
    doc = {
        "group": group_label(result.resource_group),
        "epsilon": result.epsilon,
        "scenarios": len(result.samples),
        "selected_rank": result.selected_rank,
        "selected_index": result.selected_index,
        "selected_benefit": round(result.selected_benefit, 4),
        "selected_capacity": round(result.selected_capacity, 3),
        "pi": round(result.pi, 4),
        "coverage": result.coverage(),
        "dropped": list(result.dropped),
    }
    return json.dumps(doc, indent=2) + "\n"


def sweep_csv(kind: str, points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([kind, "selected_index", "selected_benefit", "selected_capacity", "pi"])
    for p in points:
        w.writerow([f"{p.value:g}", p.selected_index, _money(p.selected_benefit),
                    _power(p.selected_capacity), _money(p.pi)])
    return buf.getvalue()
