"""Command line: ``edgesleep {run,sweep,export-lp,validate} CONFIG [options]``.

Exit codes: 0 success, 2 bad configuration or arguments, 3 invariant breach.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import config as C
from .engine import (TRACE_KINDS, InvariantError, Simulation, summarize, sweep,
                     tiny_instance_from_config, write_rows)
from .forecast import ForecastError
from .orchestrator.ideal import export_lp

EXIT_CONFIG, EXIT_INVARIANT = 2, 3


def _load(args) -> C.ScenarioConfig:
    overrides = dict(C.parse_override(s) for s in args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides["sim.seed"] = args.seed
    return C.load_config(args.config, overrides)


def _items(text: str, kind) -> list:
    try:
        return [kind(x.strip()) for x in text.split(",") if x.strip()]
    except ValueError:
        raise C.ConfigError(f"cannot parse list {text!r}") from None


def _ms_list(text: str) -> list:
    return [v / 1e3 for v in _items(text, float)]


def cmd_validate(args) -> int:
    cfg = _load(args)
    print(f"ok: {args.config} ({cfg.grid.rows}x{cfg.grid.cols} ECs, {cfg.users} users, "
          f"policy {cfg.policy.name})")
    return 0


def cmd_run(args) -> int:
    cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sim = Simulation(cfg, traces=args.trace or ())
    report = sim.run()
    (out / "report.json").write_text(report.to_json() + "\n")
    (out / "config.json").write_text(C.dumps(cfg) + "\n")
    write_rows(out / "results.csv", [report])
    sim.write_traces(out)
    print(f"{report.policy} t_max={report.t_max * 1e3:g}ms seed={report.seed} "
          f"energy_ratio={report.energy_ratio:.4f} availability={report.availability:.5f} "
          f"transitions={report.transitions_total}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    policies = _items(args.policies, str) if args.policies is not None else cfg.sweep.policies
    t_max = _ms_list(args.t_max) if args.t_max is not None else cfg.sweep.t_max
    seeds = _items(args.seeds, int) if args.seeds is not None else cfg.sweep.seeds
    for name, vals in (("policies", policies), ("t_max", t_max), ("seeds", seeds)):
        if not vals:
            raise C.ConfigError(f"sweep.{name}: at least one value required")
    for p in policies:
        if p not in C.POLICY_NAMES:
            raise C.ConfigError(f"sweep.policies: unknown policy {p!r}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(name):
        if not args.quiet:
            print(f"done {name}", file=sys.stderr)

    reports = sweep(cfg, policies, t_max, seeds, jobs=args.jobs, out_dir=out, progress=progress)
    write_rows(out / "results.csv", reports)
    summary = {"config": cfg.to_dict(), "seeds": sorted(set(seeds)), "cells": summarize(reports)}
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=1) + "\n")
    print(f"{len(reports)} runs -> {out / 'results.csv'}")
    return 0


def cmd_export_lp(args) -> int:
    cfg = _load(args)
    if args.T < 1:
        raise C.ConfigError("T: horizon must be >= 1 step")
    inst = tiny_instance_from_config(cfg, args.T)
    text = export_lp(inst, args.T, ideal=args.ideal, lifecycle_table=None if args.ideal else
                     _lc_table(cfg), up_delay=_delays(cfg, "up_delay"),
                     down_delay=_delays(cfg, "down_delay"))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    print(f"wrote {out} sha256={hashlib.sha256(text.encode()).hexdigest()[:16]}")
    return 0


def _lc_table(cfg):
    from .lifecycle import LifecycleTable
    return LifecycleTable.from_config(cfg.lifecycle)


def _delays(cfg, which):
    return {k: getattr(v, which) for k, v in cfg.power.states.items()}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgesleep", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="scenario TOML file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config value (aliases: t_max, seed, duration, policy)")
        sp.add_argument("--seed", type=int, help="master seed")

    sp = sub.add_parser("validate", help="check a config file")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("run", help="run one simulation")
    common(sp)
    sp.add_argument("--out", default="out", help="output directory")
    sp.add_argument("--trace", action="append", choices=TRACE_KINDS, help="write a trace CSV")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="policies x t_max x seeds")
    common(sp)
    sp.add_argument("--out", default="out", help="output directory (resumable)")
    sp.add_argument("--policies", help="comma separated policy names")
    sp.add_argument("--t-max", dest="t_max", help="comma separated latency limits in ms")
    sp.add_argument("--seeds", help="comma separated seeds")
    sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sp.add_argument("--quiet", action="store_true")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("export-lp", help="write the joint model of a tiny scenario as an LP file")
    common(sp)
    sp.add_argument("--T", type=int, required=True, help="number of time steps")
    sp.add_argument("--out", default="model.lp", help="LP file path")
    sp.add_argument("--ideal", action="store_true",
                    help="zero transition delays, no transition-recording rows")
    sp.set_defaults(func=cmd_export_lp)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (C.ConfigError, ForecastError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantError as exc:
        print(f"invariant breach: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
