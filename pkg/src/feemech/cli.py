"""Command-line entry point.

    feemech weitzman --config configs/baseline.json --output out/
    feemech eip1559  --config configs/full_blocks.json --seed 3
    feemech bargain  --config configs/baseline.json
    feemech sweep    --all-factors --output out/

Exit codes: 0 success (including a WARN sweep report), 2 config error,
3 numeric error.
"""
from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import json
import os
import sys
from pathlib import Path

from .bargaining import BargainingProblem, _outcome_dict, solve_bargaining
from .config import RunConfig, load_config, to_dict
from .eip1559 import simulate_trajectory, trajectory_csv, trajectory_stats
from .errors import ConfigError, FeeMechError
from .experiments import default_sweeps, run_sweep, spec_from_config, table1_report, Factor
from .mechanisms import Family
from .rng import check_seed
from .weitzman import (
    comparative_advantage_closed_form,
    comparative_advantage_mc,
    optimal_instrument,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _json_dump(path: Path, cfg: RunConfig, result) -> None:
    doc = {
        "metadata": {
            "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "seed": cfg.seed,
            "config": to_dict(cfg),
        },
        "result": result,
    }
    path.write_text(json.dumps(doc, indent=2, allow_nan=True) + "\n", encoding="utf-8")


def cmd_weitzman(cfg: RunConfig, out: Path, threads: int) -> int:
    m = cfg.model
    env = m.environment()
    kw = dict(tip_per_gas=m.tip_per_gas, seed=cfg.seed, n=cfg.replications, threads=threads)
    instruments = {}
    for fam in Family:
        x, o = optimal_instrument(env, fam, **kw)
        instruments[fam.value] = {"parameter": x, "outcome": _outcome_dict(o)}
    est = comparative_advantage_mc(env, cfg.seed, cfg.replications, tip_per_gas=m.tip_per_gas, threads=threads)
    try:
        closed = comparative_advantage_closed_form(env)
    except FeeMechError:
        closed = None
    result = {
        "q_cap_opt": est.q_cap,
        "p_floor_opt": est.p_floor,
        "instruments": instruments,
        "delta_mc": est.delta,
        "delta_mc_se": est.std_error,
        "delta_closed_form": closed,
        "favoured": ("PriceFloor" if est.delta > 0 else "QuantityCap") if est.significant() else "Indifferent",
        "significant": est.significant(),
    }
    _json_dump(out / "weitzman.json", cfg, result)
    return EXIT_OK


def cmd_eip1559(cfg: RunConfig, out: Path, threads: int) -> int:
    m = cfg.model
    dyn = m.dynamics
    traj = simulate_trajectory(dyn.params, dyn.demand_process(), m.token, dyn.tip_per_gas, dyn.blocks, cfg.seed)
    (out / f"trajectory_{cfg.seed}.csv").write_text(trajectory_csv(traj), encoding="utf-8")
    _json_dump(out / "eip1559_stats.json", cfg, dataclasses.asdict(trajectory_stats(traj)))
    return EXIT_OK


def cmd_bargain(cfg: RunConfig, out: Path, threads: int) -> int:
    m = cfg.model
    problem = BargainingProblem(m.environment(), m.beta, m.candidates, m.tip_per_gas,
                                m.disagreement, seed=cfg.seed, n=cfg.replications)
    sol = solve_bargaining(problem, threads=threads)
    _json_dump(out / "bargain.json", cfg, sol.to_dict())
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out: Path, threads: int, all_factors: bool = False) -> int:
    rows = {r.factor: r for r in (default_sweeps() if all_factors else ())}
    rows.update({r.factor: r for r in cfg.sweeps})
    if not rows:
        raise ConfigError("no sweeps configured; add a 'sweeps' section or pass --all-factors")
    unknown = sorted(set(rows) - {f.value for f in Factor})
    if unknown:
        raise ConfigError(f"unknown sweep factor(s) {unknown}")
    results = []
    for name in [f.value for f in Factor if f.value in rows]:
        try:
            spec = spec_from_config(rows[name], cfg.model, cfg.replications, cfg.seed)
        except ValueError as exc:
            raise ConfigError(f"sweep {name}: {exc}") from None
        res = run_sweep(spec, threads=threads)
        results.append(res)
        (out / f"sweep_{spec.factor.value}_{cfg.seed}.csv").write_text(res.to_csv(), encoding="utf-8")
    summary = {"sweeps": [r.to_dict() for r in results]}
    if {r.spec.factor for r in results} == set(Factor):
        report = table1_report(results)
        (out / "table1_report.txt").write_text(report.to_text(), encoding="utf-8")
        summary["report"] = report.to_dict()
        print(report.to_text(), end="")
    _json_dump(out / "table1_report.json", cfg, summary)
    return EXIT_OK


COMMANDS = {"weitzman": cmd_weitzman, "eip1559": cmd_eip1559, "bargain": cmd_bargain, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="feemech", description="Transaction fee mechanism analyses")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON run configuration (defaults to the built-in baseline)")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--output", type=Path, help="output directory (overrides output_dir)")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                       help="worker threads; results do not depend on it")
        if name == "sweep":
            p.add_argument("--all-factors", action="store_true", help="run all five factor sweeps")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            try:
                cfg = dataclasses.replace(cfg, seed=check_seed(args.seed))
            except FeeMechError as exc:
                raise ConfigError(str(exc)) from None
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        out = args.output if args.output is not None else Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "sweep":
            return cmd_sweep(cfg, out, args.threads, args.all_factors)
        return COMMANDS[args.command](cfg, out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FeeMechError as exc:
        print(f"numeric error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
