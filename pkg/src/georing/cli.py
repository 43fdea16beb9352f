"""Command-line front end: parameter validation, schedule/bounds tables, and
the simulation experiment drivers.

Every subcommand takes a seed, an output directory and either a named
profile or a JSON config; outputs are byte-stable for a fixed seed and
config. Exit status is zero only when every assertion configured for the
run passed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import fields, replace
from pathlib import Path

from .analysis import bounds_table
from .experiments import ExperimentConfig, emit_report, run_experiment
from .params import (PROFILES, ProtocolParams, params_from_json, params_to_dict,
                     profile_params, validate)
from .report import Table, write_csv, write_json

_DEFAULT_N = {
    "validate": 1_800_000,
    "schedule": 1_800_000,
    "bounds": 1_800_000,
    "sim-snapshot": 20_000,
    "sim-miss": 1_800_000,
    "sim-dynamic": 200_000,
    "sim-overhead": 1_800_000,
}

_DEFAULT_PROFILE = {
    "sim-miss": "paper-eps2",
    "sim-dynamic": "paper-eps2",
}

_CONFIG_FIELDS = {f.name for f in fields(ExperimentConfig)} - {"kind", "params", "out_dir"}


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _build_params(args, command: str, doc: dict) -> ProtocolParams:
    if "params" in doc:
        return params_from_json(doc["params"])
    profile = args.profile or _DEFAULT_PROFILE.get(command, "paper-eps0")
    n = args.n if args.n is not None else _DEFAULT_N[command]
    overrides = {}
    if getattr(args, "gamma", None) is not None:
        overrides["gamma"] = args.gamma
    return profile_params(profile, n=n, sigma=args.sigma, **overrides)


def _build_experiment(args, command: str, kind: str) -> ExperimentConfig:
    doc = _load_config(args.config)
    params = _build_params(args, command, doc)
    cfg = ExperimentConfig(kind=kind, params=params, seed=args.seed)
    updates = {}
    for key, value in doc.items():
        if key == "params":
            continue
        if key not in _CONFIG_FIELDS:
            raise SystemExit(f"unknown config field {key!r}")
        if isinstance(value, list):
            value = tuple(value)
        updates[key] = value
    if args.trials is not None:
        updates["trials"] = args.trials
    return replace(cfg, **updates)


def _print_criteria(summary: dict) -> None:
    for name, passed in summary.get("criteria", {}).items():
        print(f"  {name}: {'PASS' if passed else 'FAIL'}")


def _finish(result, out_dir: str) -> int:
    paths = emit_report(result, out_dir)
    _print_criteria(result.summary)
    print(f"{result.kind}: {'OK' if result.ok else 'FAILED'} "
          f"({len(paths)} files in {out_dir})")
    return 0 if result.ok else 1


def cmd_validate(args) -> int:
    doc = _load_config(args.config)
    params = _build_params(args, "validate", doc)
    report = validate(params, delta=args.delta)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "validation.json",
               {"params": params_to_dict(params), **report.to_dict()})
    for cond in report.conditions:
        tag = "advisory" if cond.advisory else "core"
        print(f"  [{tag}] {cond.name}: {'PASS' if cond.passed else 'FAIL'} ({cond.detail})")
    print(f"validate: {report.profile_class} "
          f"({'OK' if report.overall_pass else 'FAILED'})")
    return 0 if report.overall_pass else 1


def cmd_schedule(args) -> int:
    doc = _load_config(args.config)
    params = _build_params(args, "schedule", doc)
    schedule = params.schedule()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [(e.index, e.r_i, e.d_i, e.T_i) for e in schedule.rings]
    write_csv(out / "schedule.csv", ("ring", "r_i", "d_i", "T_i"), rows)
    write_json(out / "schedule.json", {
        "params": params_to_dict(params), "K": schedule.K,
        "degenerate": schedule.degenerate,
        "rings": [{"index": e.index, "r_i": e.r_i, "d_i": e.d_i, "T_i": e.T_i}
                  for e in schedule.rings]})
    print(f"schedule: K={schedule.K}, r={params.r:.6g}, "
          f"outermost r_K={schedule.rings[-1].r_i:.6g}"
          + (" (single-ring)" if schedule.degenerate else ""))
    return 0


def cmd_bounds(args) -> int:
    doc = _load_config(args.config)
    params = _build_params(args, "bounds", doc)
    schedule = params.schedule()
    rows = bounds_table(params, schedule)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = tuple(rows[0].keys())
    write_csv(out / "bounds.csv", header, [tuple(r[h] for h in header) for r in rows])
    write_json(out / "bounds.json", {"params": params_to_dict(params),
                                     "rings": rows})
    print(f"bounds: {len(rows)} rings written to {out}")
    return 0


def cmd_sim(args, command: str, kind: str) -> int:
    cfg = _build_experiment(args, command, kind)
    result = run_experiment(cfg)
    return _finish(result, args.out)


def cmd_sim_overhead(args) -> int:
    doc = _load_config(args.config)
    params = _build_params(args, "sim-overhead", doc)
    base_cfg = _build_experiment(args, "sim-overhead", "overhead-scaling")
    if base_cfg.k_values:
        result = run_experiment(base_cfg)
        return _finish(result, args.out)

    # default bundle: contraction at the derived K, plus the divergent control
    k = params.schedule().K
    contract = replace(base_cfg, k_values=(k, k + 4), expect="contracting",
                       horizon_ref="min")
    diverge_params = profile_params(
        args.profile or "paper-eps0", n=params.n, sigma=params.sigma, gamma=1.5)
    diverge = replace(base_cfg, params=diverge_params, k_values=(2, 3, 4, 5, 6),
                      expect="diverging", horizon_ref="max", horizon_lifetimes=4.0)
    res_c = run_experiment(contract)
    res_d = run_experiment(diverge)
    rc = _finish(res_c, str(Path(args.out) / "contracting"))
    rd = _finish(res_d, str(Path(args.out) / "diverging"))
    return rc or rd


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="georing",
        description="Ring-structured position publishing and geographic "
                    "routing: validation, bounds and simulations.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--profile", choices=sorted(PROFILES))
        p.add_argument("--n", type=int, default=None, help="number of nodes")
        p.add_argument("--sigma", type=float, default=1.0)
        p.add_argument("--trials", type=int, default=None)

    p = sub.add_parser("validate", help="check the parameter regime")
    common(p)
    p.add_argument("--delta", type=float, default=math.pi / 3.0)

    for name in ("schedule", "bounds"):
        common(sub.add_parser(name))

    for name in ("sim-snapshot", "sim-miss", "sim-dynamic"):
        common(sub.add_parser(name))

    p = sub.add_parser("sim-overhead")
    common(p)
    p.add_argument("--gamma", type=float, default=None)

    args = parser.parse_args(argv)
    if args.out is None:
        args.out = f"out/{args.command.replace('sim-', '')}"

    if args.command == "validate":
        return cmd_validate(args)
    if args.command == "schedule":
        return cmd_schedule(args)
    if args.command == "bounds":
        return cmd_bounds(args)
    if args.command == "sim-snapshot":
        return cmd_sim(args, "sim-snapshot", "snapshot-trajectories")
    if args.command == "sim-miss":
        return cmd_sim(args, "sim-miss", "worst-case-miss")
    if args.command == "sim-dynamic":
        return cmd_sim(args, "sim-dynamic", "dynamic-run")
    if args.command == "sim-overhead":
        return cmd_sim_overhead(args)
    raise SystemExit(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
