"""Command-line interface.

Subcommands: gen-network, gen-scenario, run, compare, aggregate. A run config
may come from a JSON file (--config) with any field overridable by flags;
precedence is flags > file > defaults. Every simulation requires an explicit
seed (from --seed, the config file, or the scenario document itself). The
output directory can be overridden with the GRIDBOUNDS_OUTDIR environment
variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .engine import (
    CONTROLLERS, RunConfig, SimulationReport, ensemble_stats, run,
    run_compare, write_outputs,
)
from .network import Network, generate_radial_network, validate_topology
from .scenario import Knobs, Scenario, generate_scenario

_SUMMARY_COLUMNS = (
    "transformer_overload_pct", "voltage_violation_pct", "peak_kw",
    "total_cost", "total_cost_undiscounted",
)


class CliError(Exception):
    """Bad arguments or unreadable inputs (exit code 2)."""


def _read(path: str, kind: str) -> str:
    if not os.path.exists(path):
        raise CliError(f"{kind} not found: {path}")
    with open(path) as f:
        return f.read()


def _load_scenario(args, file_defaults: dict) -> Scenario:
    def pick(flag, key, default=None):
        return flag if flag is not None else file_defaults.get(key, default)

    scenario_file = pick(getattr(args, "scenario", None), "scenario_file")
    if scenario_file:
        return Scenario.from_json(_read(scenario_file, "scenario"))
    network_file = pick(getattr(args, "network", None), "network_file")
    if network_file:
        net = Network.from_json(_read(network_file, "network"))
    else:
        consumers = pick(getattr(args, "consumers", None), "consumers")
        if consumers is None:
            raise CliError("need --scenario, --network, or --consumers")
        net = generate_radial_network(int(consumers),
                                      seed=int(pick(None, "network_seed", 1)),
                                      style=int(pick(None, "style", 4)))
    seed = pick(getattr(args, "seed", None), "seed")
    if seed is None:
        raise CliError("an explicit --seed is required to generate a scenario")
    knobs = Knobs(pv=float(pick(args.pv, "pv", 0.0)),
                  ev=float(pick(args.ev, "ev", 0.0)),
                  storage=float(pick(args.storage, "storage", 0.0)),
                  phi=float(pick(args.phi, "phi", 0.0)))
    warmup = int(pick(args.warmup_days, "warmup_days", 35))
    eval_days = int(pick(args.eval_days, "eval_days", 5))
    return generate_scenario(net, knobs, seed=int(seed),
                             days=warmup + eval_days + 1)


def _build_config(args) -> RunConfig:
    file_defaults = {}
    if getattr(args, "config", None):
        file_defaults = json.loads(_read(args.config, "config"))
    scn = _load_scenario(args, file_defaults)

    def pick(flag, key, default):
        return flag if flag is not None else file_defaults.get(key, default)

    return RunConfig(
        scenario=scn,
        controller=str(pick(getattr(args, "controller", None), "controller", "bounds")),
        eval_days=int(pick(args.eval_days, "eval_days", 5)),
        warmup_days=int(pick(args.warmup_days, "warmup_days", 35)),
        discount=float(pick(getattr(args, "discount", None), "discount", 0.8)),
    )


def _outdir(args, default: str) -> str:
    env = os.environ.get("GRIDBOUNDS_OUTDIR")
    base = args.outdir or env or default
    return base


def cmd_gen_network(args) -> int:
    net = generate_radial_network(args.consumers, seed=args.seed, style=args.style)
    problems = validate_topology(net)
    if problems:
        raise RuntimeError(f"generated network invalid: {problems}")
    text = net.to_json()
    if args.output:
        with open(args.output, "w") as f:
            f.write(text)
    else:
        print(text)
    return 0


def cmd_gen_scenario(args) -> int:
    net = Network.from_json(_read(args.network, "network"))
    knobs = Knobs(pv=args.pv, ev=args.ev, storage=args.storage, phi=args.phi)
    scn = generate_scenario(net, knobs, seed=args.seed, days=args.days)
    text = scn.to_json()
    if args.output:
        with open(args.output, "w") as f:
            f.write(text)
    else:
        print(text)
    return 0


def _run_one_seed(payload):
    scenario_json, controller, eval_days, warmup_days, discount, seed = payload
    scn = Scenario.from_json(scenario_json)
    cfg = RunConfig(scenario=scn, controller=controller, eval_days=eval_days,
                    warmup_days=warmup_days, discount=discount)
    return run(cfg)


def cmd_run(args) -> int:
    cfg = _build_config(args)
    outdir = _outdir(args, "gridbounds_out")
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",")]
        if len(seeds) < 2:
            raise CliError("--seeds needs at least 2 seeds for an ensemble")
        payloads = []
        for s in seeds:
            scn = generate_scenario(cfg.scenario.network, cfg.scenario.knobs,
                                    seed=s, days=cfg.scenario.days)
            payloads.append((scn.to_json(), cfg.controller, cfg.eval_days,
                             cfg.warmup_days, cfg.discount, s))
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                reports = list(pool.map(_run_one_seed, payloads))
        else:
            reports = [_run_one_seed(p) for p in payloads]
        for s, rep in zip(seeds, reports):
            write_outputs(rep, os.path.join(outdir, f"seed_{s}"))
        stats = ensemble_stats(reports)
        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "ensemble.json"), "w") as f:
            json.dump(stats, f, indent=1, sort_keys=True)
        print(json.dumps(stats, indent=1, sort_keys=True))
    else:
        report = run(cfg)
        write_outputs(report, outdir)
        print(report.to_json())
    return 0


def _per_day_mean(report: SimulationReport, key: str) -> float:
    return float(np.mean([d[key] for d in report.per_day]))


def cmd_compare(args) -> int:
    cfg = _build_config(args)
    controllers = tuple(args.controllers.split(","))
    alias = {"central": "central", "centralized": "central",
             "bounds": "bounds", "local": "local"}
    try:
        controllers = tuple(alias[c] for c in controllers)
    except KeyError as exc:
        raise CliError(f"unknown controller {exc.args[0]!r}") from exc
    reports = run_compare(cfg, controllers=controllers)
    lines = ["controller," + ",".join(_SUMMARY_COLUMNS)]
    for name in controllers:
        s = reports[name].summary
        row = [name,
               f"{s['mean_daily_transformer_overload_pct']:.4f}",
               f"{s['mean_daily_voltage_violation_pct']:.4f}",
               f"{s['peak_kw']:.4f}",
               f"{s['total_cost']:.4f}",
               f"{s['total_cost_undiscounted']:.4f}"]
        lines.append(",".join(row))
    text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w") as f:
            f.write(text)
        outdir = _outdir(args, None)
        if outdir:
            for name, rep in reports.items():
                write_outputs(rep, os.path.join(outdir, name))
    else:
        print(text, end="")
    return 0


def cmd_aggregate(args) -> int:
    reports = []
    for path in args.reports:
        doc = json.loads(_read(path, "report"))
        reports.append(SimulationReport(
            controller=doc["controller"], seed=doc["seed"],
            eval_days=doc["eval_days"], per_day=doc["per_day"],
            summary=doc["summary"]))
    if len(reports) < 2:
        raise CliError("aggregate needs at least 2 reports")
    stats = ensemble_stats(reports)
    lines = ["metric,mean,se"]
    for key in sorted(stats):
        lines.append(f"{key},{stats[key]['mean']:.6f},{stats[key]['se']:.6f}")
    text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w") as f:
            f.write(text)
    else:
        print(text, end="")
    return 0


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--scenario", help="scenario JSON produced by gen-scenario")
    p.add_argument("--network", help="network JSON produced by gen-network")
    p.add_argument("--consumers", type=int, help="generate a network inline")
    p.add_argument("--seed", type=int, help="scenario seed (required unless --scenario)")
    p.add_argument("--pv", type=float, default=None)
    p.add_argument("--ev", type=float, default=None)
    p.add_argument("--storage", type=float, default=None)
    p.add_argument("--phi", type=float, default=None)
    p.add_argument("--eval-days", type=int, default=None)
    p.add_argument("--warmup-days", type=int, default=None)
    p.add_argument("--discount", type=float, default=None)
    p.add_argument("--outdir", default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gridbounds",
                                 description="Day-ahead DER coordination via "
                                             "demand/supply power bounds")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-network", help="generate a seeded radial network")
    g.add_argument("--consumers", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--style", type=int, default=4,
                   help="max consumers per feeder chain")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen_network)

    g = sub.add_parser("gen-scenario", help="generate a seeded scenario")
    g.add_argument("--network", required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--days", type=int, default=41)
    g.add_argument("--pv", type=float, default=0.0)
    g.add_argument("--ev", type=float, default=0.0)
    g.add_argument("--storage", type=float, default=0.0)
    g.add_argument("--phi", type=float, default=0.0)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen_scenario)

    g = sub.add_parser("run", help="run one controller (or a seed ensemble)")
    _add_scenario_flags(g)
    g.add_argument("--controller", choices=CONTROLLERS, default=None)
    g.add_argument("--seeds", help="comma-separated seeds for an ensemble")
    g.add_argument("--jobs", type=int, default=1)
    g.set_defaults(func=cmd_run)

    g = sub.add_parser("compare", help="side-by-side controller table (CSV)")
    _add_scenario_flags(g)
    g.add_argument("--controllers", default="bounds,central,local")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_compare)

    g = sub.add_parser("aggregate", help="mean/SE across report.json files")
    g.add_argument("reports", nargs="+")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_aggregate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse uses exit code 2 for bad flags
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
