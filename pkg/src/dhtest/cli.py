"""Command-line front end: ``dhtest check|run|batch --config PATH [flags]``.

Flags override the corresponding config keys.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import ConfigError, ExperimentConfig, apply_overrides, parse_config
from .graph import GraphError
from .model import ModelError, check_global_identifiability
from .scenario import Scenario
from .schedule import ScheduleError
from .sim import (
    PreconditionError,
    run_batch,
    run_scenario,
    write_positions_csv,
    write_summary_csv,
    write_trace_csv,
)

log = logging.getLogger("dhtest")


def _write_manifest(cfg: ExperimentConfig, out: Path, command: str) -> None:
    manifest = {"command": command, "version": __version__, "config": cfg.to_dict()}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def cmd_check(cfg: ExperimentConfig) -> int:
    seed = cfg.seeds[0]
    model, graph, _ = cfg.scenario.instance(seed)
    ok = True
    ident = check_global_identifiability(model)
    if ident:
        print("identifiability: OK")
    else:
        p, q = ident.witness
        print(f"identifiability: FAILED, no agent distinguishes states {p} and {q}")
        ok = False
    metrics = graph.metrics
    print(f"agents: {graph.num_nodes}  states: {model.num_states}  edges: {len(graph.edges)}")
    if metrics.strongly_connected:
        D = metrics.diameter
        print("strongly connected: yes")
        print(f"diameter: {D}")
        print(f"min epoch length  poe: >{D} (at least one epoch)  poe-fc: >={2 * D} (every epoch)  min-rule: 1")
    else:
        print("strongly connected: NO")
        ok = False
    return 0 if ok else 1


def cmd_run(cfg: ExperimentConfig) -> int:
    seed = cfg.seeds[0]
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = run_scenario(cfg.scenario, seed, trace=cfg.trace)
    rec = result.record
    write_trace_csv(rec, out / "trace.csv")
    write_summary_csv([rec], out / "summary.csv")
    if result.positions is not None:
        write_positions_csv(result.positions, out / "positions.csv")
    _write_manifest(replace(cfg, seeds=(seed,)), out, "run")
    print(f"{rec.protocol} seed {seed}: convergence_step={rec.convergence_step} "
          f"separation_step={rec.separation_step} total_bits={rec.total_bits}")
    print(f"wrote {out}/trace.csv, {out}/summary.csv")
    return 0


def cmd_batch(cfg: ExperimentConfig, workers: int = 1) -> int:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records, aggregates = [], []
    for name in cfg.protocols:
        scenario: Scenario = cfg.scenario
        if name != scenario.protocol.name:
            scenario = scenario.with_protocol(name=name, schedule=None)
        batch = run_batch(scenario, cfg.seeds, trace=cfg.trace, workers=workers)
        records.extend(batch.records)
        aggregates.append(batch.aggregates())
        if cfg.trace != "off":
            for r in batch.records:
                write_trace_csv(r, out / f"trace_{name}_seed{r.seed}.csv")
        agg = aggregates[-1]
        print(f"{name}: success {agg['success_rate']:.2f}  "
              f"median convergence {agg['convergence_step']['median']}  "
              f"median total bits {agg['total_bits']['median']}")
    write_summary_csv(records, out / "summary.csv")
    (out / "aggregates.json").write_text(json.dumps(aggregates, indent=2) + "\n")
    _write_manifest(cfg, out, "batch")
    print(f"wrote {out}/summary.csv, {out}/aggregates.json")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dhtest", description="Finite-time distributed hypothesis testing simulator."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("check", "verify identifiability and connectivity, print the diameter"),
        ("run", "single seeded run; writes trace and summary CSVs"),
        ("batch", "runs over a seed range; writes per-seed summaries and aggregates"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--seed", type=int, help="single run seed")
        p.add_argument("--seeds", help="inclusive seed range A..B")
        p.add_argument("--protocol", help="poe | poe-fc | min-rule (batch: comma list to compare)")
        p.add_argument("--alpha", type=float)
        p.add_argument("--horizon", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--trace", choices=["full", "epoch", "off", "auto"])
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "batch":
            p.add_argument("--workers", type=int, default=1, help="parallel processes")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = parse_config(args.config)
        cfg = apply_overrides(
            cfg, seed=args.seed, seeds=args.seeds, protocol=args.protocol, alpha=args.alpha,
            horizon=args.horizon, out=args.out, trace=args.trace,
        )
        if args.command == "check":
            return cmd_check(cfg)
        if args.command == "run":
            return cmd_run(cfg)
        return cmd_batch(cfg, workers=args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
    except (ModelError, GraphError, ScheduleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
