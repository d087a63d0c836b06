"""``flexprice`` command line: validate, scenarios, dispatch, price, sweep."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .dsm import DsmInfeasibleError
from .model import (
    ConfigError,
    ConfigParseError,
    example_config_path,
    group_label,
    parse_group,
    read_config,
    validate,
)
from .pricing import (
    PricingError,
    SolverLimitError,
    benefits_csv,
    default_jobs,
    price,
    pricing_json,
    sweep_confidence,
    sweep_csv,
    sweep_reduction,
    sweep_scale,
)
from .scenario import from_csv, generate, scenario_slice, to_csv
from .solver import SolveOptions, solve_milp
from .ucopt import InfeasibleModelError, build_uc, cost_json, decode, solution_csv

EXIT_OK, EXIT_IO, EXIT_PARSE, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_LIMIT = range(6)

DEFAULT_POINTS = {
    "confidence": [0.75, 0.8, 0.85, 0.9, 0.95],
    "scale": [0.05, 0.1, 0.2, 0.3],
    "reduction": [0.0, 0.05, 0.1],
}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _write(path: Path, text: str):
    """Write via a temporary file so readers never see partial output."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _load(args):
    if args.config == "paper_case" and not Path(args.config).exists():
        args.config = str(example_config_path())
    try:
        cfg = read_config(args.config)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {args.config}: {exc.strerror or exc}") from None
    changes = {}
    if args.seed is not None:
        changes["rng_seed"] = args.seed
    if args.segments is not None:
        changes["pwl_segments"] = args.segments
    if args.capacity_rule is not None:
        changes["capacity_rule"] = args.capacity_rule
    if args.epsilon is not None:
        changes["epsilon"] = args.epsilon
    if args.scenarios is not None:
        changes["scenario_count"] = args.scenarios
    if changes:
        cfg = cfg.replace(**changes)
        validate(cfg)
    args.effective_seed = cfg.rng_seed
    return cfg


def _options(args) -> SolveOptions:
    kw = {"backend": args.backend}
    if args.gap is not None:
        kw["rel_gap"] = args.gap
    return SolveOptions(**kw)


def _scenarios(args, cfg):
    if args.scenarios_in:
        try:
            text = Path(args.scenarios_in).read_text()
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot read {args.scenarios_in}: {exc.strerror or exc}") from None
        try:
            sc = from_csv(text, seed=cfg.rng_seed)
        except ValueError as exc:
            raise CliError(EXIT_PARSE, f"{args.scenarios_in}: {exc}") from None
        if sc.slot_count != cfg.grid.slot_count:
            raise CliError(EXIT_VALIDATION, f"{args.scenarios_in}: {sc.slot_count} slots, config has "
                                            f"{cfg.grid.slot_count}")
    else:
        sc = generate(cfg)
    if args.scenarios_out:
        _write(Path(args.scenarios_out), to_csv(sc))
    return sc


def _groups(cfg, spec: str):
    if spec == "all":
        groups = cfg.groups()
    else:
        try:
            groups = [parse_group(spec)]
        except ValueError as exc:
            raise CliError(EXIT_VALIDATION, str(exc)) from None
    for g in groups:
        if not cfg.group_resources(g):
            raise CliError(EXIT_VALIDATION, f"no flexible resources in group {group_label(g)}")
    return groups


# -- commands ---------------------------------------------------------------------

def cmd_validate(args, out: Path):
    cfg = _load(args)
    print(f"{args.config}: ok ({len(cfg.units)} units, {len(cfg.renewables)} renewable sources, "
          f"{len(cfg.flexible)} flexible resources in {len(cfg.groups())} groups)")


def cmd_scenarios(args, out: Path):
    cfg = _load(args)
    sc = generate(cfg)
    path = Path(args.scenarios_out) if args.scenarios_out else out / "scenarios.csv"
    _write(path, to_csv(sc))
    print(f"wrote {sc.n} scenarios to {path}")


def cmd_dispatch(args, out: Path):
    cfg = _load(args)
    sc = _scenarios(args, cfg)
    if not 0 <= args.scenario < sc.n:
        raise CliError(EXIT_VALIDATION, f"scenario index {args.scenario} out of range [0, {sc.n})")
    if args.group != "all":
        cfg = cfg.replace(flexible=cfg.group_resources(_groups(cfg, args.group)[0]))
    wind, solar = scenario_slice(sc, args.scenario)
    dsm_on = args.dsm == "on"
    problem = build_uc(cfg, wind, solar, dsm_on)
    res = solve_milp(problem, _options(args))
    if res.status == "infeasible":
        raise CliError(EXIT_INFEASIBLE, f"scenario {args.scenario} is infeasible")
    if not res.ok:
        raise CliError(EXIT_LIMIT, f"scenario {args.scenario}: solver stopped on {res.status}")
    sol = decode(problem, res.values, cfg, wind, solar)
    _write(out / f"dispatch_{args.dsm}.csv", solution_csv(sol, cfg))
    _write(out / f"cost_{args.dsm}.json", cost_json(sol))
    print(f"scenario {args.scenario}, DSM {args.dsm}: total cost {sol.cost_total:.4f} "
          f"(piecewise-linear objective {sol.objective:.4f})")


def _table(rows) -> str:
    head = f"{'group':<16}{'benefit':>12}{'capacity':>12}{'compensation':>14}{'time_s':>9}"
    lines = [head, "-" * len(head)]
    for g, r, dt in rows:
        lines.append(f"{group_label(g):<16}{r.selected_benefit:>12.4f}{r.selected_capacity:>12.3f}"
                     f"{r.pi:>14.4f}{dt:>9.1f}")
    return "\n".join(lines)


def cmd_price(args, out: Path):
    cfg = _load(args)
    sc = _scenarios(args, cfg)
    opts = _options(args)
    rows = []
    for g in _groups(cfg, args.group):
        t0 = time.perf_counter()
        r = price(cfg, sc, g, opts, jobs=args.jobs, strict=not args.lenient)
        dt = time.perf_counter() - t0
        sub = out / group_label(g).replace(":", "_")
        _write(sub / "benefits.csv", benefits_csv(r))
        _write(sub / "pricing.json", pricing_json(r))
        rows.append((g, r, dt))
    summary = ["group,benefit,capacity,compensation,wall_time_s"]
    for g, r, dt in rows:
        summary.append(f"{group_label(g)},{r.selected_benefit:.4f},{r.selected_capacity:.3f},{r.pi:.4f},{dt:.1f}")
    _write(out / "summary.csv", "\n".join(summary) + "\n")
    print(_table(rows))
    return rows


def cmd_sweep(args, out: Path):
    cfg = _load(args)
    sc = _scenarios(args, cfg)
    opts = _options(args)
    points = args.points or DEFAULT_POINTS[args.kind]
    g = _groups(cfg, args.group)[0]
    fn = {"confidence": sweep_confidence, "scale": sweep_scale, "reduction": sweep_reduction}[args.kind]
    try:
        curve = fn(cfg, sc, g, points, opts, jobs=args.jobs, strict=not args.lenient)
    except ValueError as exc:
        raise CliError(EXIT_VALIDATION, str(exc)) from None
    path = out / f"sweep_{args.kind}.csv"
    _write(path, sweep_csv(args.kind, curve))
    for p in curve:
        print(f"{args.kind}={p.value:g}: benefit {p.selected_benefit:.4f}, pi {p.pi:.4f}")


def cmd_rerun(args, out: Path):
    try:
        doc = json.loads(Path(args.manifest_file).read_text())
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {args.manifest_file}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_PARSE, f"{args.manifest_file}: {exc}") from None
    return main(doc["argv"])


COMMANDS = {
    "validate": cmd_validate,
    "scenarios": cmd_scenarios,
    "dispatch": cmd_dispatch,
    "price": cmd_price,
    "sweep": cmd_sweep,
    "rerun": cmd_rerun,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="YAML configuration file, or paper_case for the bundled case")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--jobs", type=int, default=default_jobs(), help="worker processes for pricing")
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--gap", type=float, help="relative MIP gap")
    common.add_argument("--segments", type=int, help="piecewise-linear segments per unit")
    common.add_argument("--capacity-rule", choices=("peak_shift", "baseline_peak"))
    common.add_argument("--epsilon", type=float, help="chance-constraint risk level")
    common.add_argument("--scenarios", type=int, help="number of scenarios")
    common.add_argument("--scenarios-in", help="read scenarios from this CSV instead of generating")
    common.add_argument("--scenarios-out", help="also write the scenarios used to this CSV")
    common.add_argument("--backend", choices=("highs", "bnb"), default="highs", help="MILP solver")
    common.add_argument("--manifest", action="store_true", help="write manifest.json to the output directory")

    p = argparse.ArgumentParser(prog="flexprice", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check a configuration")
    sub.add_parser("scenarios", parents=[common], help="write the scenario set as CSV")
    d = sub.add_parser("dispatch", parents=[common], help="solve one scenario")
    d.add_argument("--scenario", type=int, default=0)
    d.add_argument("--dsm", choices=("on", "off"), default="off")
    d.add_argument("--group", default="all", help="type:window, or all resources")
    pr = sub.add_parser("price", parents=[common], help="price resource groups")
    pr.add_argument("--group", default="all", help="type:window or all")
    pr.add_argument("--lenient", action="store_true", help="drop scenarios that hit solver limits")
    sw = sub.add_parser("sweep", parents=[common], help="confidence, scale or reduction sweep")
    sw.add_argument("--kind", choices=tuple(DEFAULT_POINTS), required=True)
    sw.add_argument("--points", type=float, nargs="+")
    sw.add_argument("--group", default="energy:full")
    sw.add_argument("--lenient", action="store_true")
    rr = sub.add_parser("rerun", help="repeat the run recorded in a manifest")
    rr.add_argument("manifest_file")
    return p


def _manifest(args, argv, out: Path, wall: float) -> str:
    opts = _options(args)
    doc = {
        "command": args.command,
        "config": str(args.config),
        "argv": list(argv),
        "seed": getattr(args, "effective_seed", args.seed),
        "solver_options": asdict(opts),
        "out_dir": str(out),
        "version": __version__,
        "wall_time_s": round(wall, 3),
    }
    return json.dumps(doc, indent=2) + "\n"


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    if args.command == "rerun":
        try:
            return cmd_rerun(args, Path("."))
        except CliError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return exc.code
    out = Path(args.out_dir)
    t0 = time.perf_counter()
    try:
        COMMANDS[args.command](args, out)
        if args.manifest:
            _write(out / "manifest.json", _manifest(args, argv, out, time.perf_counter() - t0))
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InfeasibleModelError, DsmInfeasibleError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverLimitError as exc:
        print(f"solver limit: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except PricingError as exc:
        print(f"pricing error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
