"""Command-line front end: run, validate, topo, report.

Exit codes: 0 success, 1 configuration/validation failure, 2 runtime error.
All file output stays under --out.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .config import load_config, resolve_topology
from .errors import (
    DisconnectedGraph,
    DuplicateLink,
    FednetsimError,
    InvalidCount,
    MissingFile,
    ParseError,
    SchemaError,
    ValidationError,
)
from .metrics import render_text, summarize, summary_to_dict
from .orchestrator import run_experiment
from .topology import NodeRole, path_delay_ms, shortest_path

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2

_CONFIG_ERRORS = (
    MissingFile,
    ParseError,
    ValidationError,
    SchemaError,
    DisconnectedGraph,
    DuplicateLink,
    InvalidCount,
)


def _print_config_error(exc: Exception) -> None:
    if isinstance(exc, ValidationError):
        print(f"configuration invalid ({len(exc.violations)} violations):", file=sys.stderr)
        for violation in exc.violations:
            print(f"  - {violation}", file=sys.stderr)
    else:
        print(f"configuration error: {exc}", file=sys.stderr)


def _load(args):
    return load_config(args.config_dir, use_defaults=args.defaults)


def cmd_run(args) -> int:
    try:
        cfg = _load(args)
    except _CONFIG_ERRORS as exc:
        _print_config_error(exc)
        return EXIT_INVALID
    if args.seed is not None:
        # override fl.seed only; traffic seeds stay fixed across sweeps
        cfg = dataclasses.replace(cfg, fl=dataclasses.replace(cfg.fl, seed=args.seed))

    out_dir = Path(args.out)

    def on_round(record):
        max_s2c = max(t.s2c_s for t in record.timings)
        print(
            f"round {record.round}/{cfg.fl.rounds}  "
            f"duration={record.round_duration_s:.6g}s  max_s2c={max_s2c:.6g}s  "
            f"loss={record.global_loss:.6g}  accuracy={record.global_accuracy:.4f}"
        )

    try:
        result = run_experiment(cfg, out_dir=out_dir, round_callback=on_round)
        if cfg.general.report and result.csv_dir is not None:
            summary = summarize(result.csv_dir)
            report_path = result.csv_dir / "report.json"
            report_path.write_text(json.dumps(summary_to_dict(summary), indent=2) + "\n")
    except FednetsimError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        _load(args)
    except _CONFIG_ERRORS as exc:
        _print_config_error(exc)
        return EXIT_INVALID
    print("configuration OK")
    return EXIT_OK


def cmd_topo(args) -> int:
    try:
        cfg = _load(args)
        topo = resolve_topology(cfg.net)
    except _CONFIG_ERRORS as exc:
        _print_config_error(exc)
        return EXIT_INVALID
    print(f"nodes: {len(topo.nodes)}  links: {len(topo.links)}")
    print(f"{'link':<18} {'bw_mbps':>9} {'delay_ms':>9} {'loss':>7}")
    for link in topo.links:
        print(
            f"{link.a + '-' + link.b:<18} {link.attrs.bandwidth_mbps:>9.6g} "
            f"{link.attrs.delay_ms:>9.6g} {link.attrs.loss_frac:>7.4g}"
        )
    clients = sorted(topo.nodes_with_role(NodeRole.CLIENT))
    if clients:
        print()
        print(f"server {cfg.net.server_node} -> client paths:")
        print(f"{'client':<10} {'hops':>5} {'delay_ms':>9}")
        for cid in clients:
            path = shortest_path(topo, cfg.net.server_node, cid)
            print(f"{cid:<10} {len(path):>5} {path_delay_ms(path):>9.6g}")
    return EXIT_OK


def cmd_report(args) -> int:
    csv_dir = Path(args.csv_dir)
    try:
        summary = summarize(csv_dir)
    except FileNotFoundError as exc:
        print(f"missing archive file: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except SchemaError as exc:
        print(f"archive schema error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(render_text(summary), end="")
    report_path = csv_dir / "report.json"
    report_path.write_text(json.dumps(summary_to_dict(summary), indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fednetsim",
        description="Federated learning rounds co-simulated over a flow-level network.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the configured experiment")
    run.add_argument("config_dir", help="directory with fl.toml, net.toml, general.toml")
    run.add_argument("--defaults", action="store_true", help="substitute defaults for missing files")
    run.add_argument("--seed", type=int, default=None, help="override fl.seed")
    run.add_argument("--out", default="out", help="output root for CSV archive and logs")
    run.set_defaults(fn=cmd_run)

    val = sub.add_parser("validate", help="load and cross-validate without running")
    val.add_argument("config_dir")
    val.add_argument("--defaults", action="store_true")
    val.set_defaults(fn=cmd_validate)

    topo = sub.add_parser("topo", help="inspect the resolved topology")
    topo.add_argument("config_dir")
    topo.add_argument("--defaults", action="store_true")
    topo.set_defaults(fn=cmd_topo)

    report = sub.add_parser("report", help="summarize a CSV archive offline")
    report.add_argument("csv_dir")
    report.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
