"""Command-line harness.

Exit codes: 0 success, 2 configuration error, 3 correctness-gate failure.
The FLEXGRID_SEED environment variable overrides the config seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import ConfigError, GateError, audit_report, load_config, read_only_bench, run, sweep
from .workload import WorkloadSpec, gen_trace, write_trace

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GATE = 3


def _cmd_run(args: argparse.Namespace) -> int:
    reports = run(load_config(args.config), out_dir=args.out)
    for kind, rep in reports.items():
        t = rep["totals"]
        print(f"{kind}: search {t['search_s']:.3f}s  update {t['update_s']:.3f}s  "
              f"events {rep['events']['total']}  "
              f"assumption2 {'ok' if rep['assumption2']['satisfied'] else 'VIOLATED'}")
    print(f"reports written to {args.out}")
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    result = sweep(load_config(args.config), out_dir=args.out)
    ran = [c for c in result["cells"] if c["valid"]]
    print(f"sweep: {len(ran)} cells run, {len(result['cells']) - len(ran)} invalid; "
          f"heatmap in {args.out}/sweep_heatmap.csv")
    return EXIT_OK


def _cmd_audit(args: argparse.Namespace) -> int:
    try:
        with open(args.report) as f:
            report = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read report {args.report}: {exc}") from exc
    try:
        verdict = audit_report(report, delta=args.delta)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(json.dumps(verdict, indent=2))
    return EXIT_OK


def _cmd_readonly(args: argparse.Namespace) -> int:
    reports = read_only_bench(load_config(args.config), out_dir=args.out)
    for kind, rep in reports.items():
        print(f"{kind}: mean search {rep['mean_search_s'] * 1e6:.2f} us "
              f"over {rep['totals']['searches']} queries")
    return EXIT_OK


def _cmd_gen(args: argparse.Namespace) -> int:
    try:
        with open(args.spec) as f:
            spec = WorkloadSpec.from_json(json.load(f))
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        raise ConfigError(f"workload spec {args.spec}: {exc}") from exc
    ops = gen_trace(spec)
    write_trace(ops, args.out)
    print(f"{len(ops)} ops written to {args.out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="flexgrid",
        description="Adaptive grid index benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="replay a workload on the configured variants")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="grid of runs over threshold coefficients")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("audit", help="check a report against the amortized bounds")
    p.add_argument("--report", required=True)
    p.add_argument("--delta", type=float, default=None,
                   help="assumed growth rate per update in [0, 1]; default: estimated")
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("readonly", help="searches-only comparison")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_readonly)

    p = sub.add_parser("gen", help="write a trace file from a workload spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GateError as exc:
        print(f"correctness gate failed: {exc}", file=sys.stderr)
        return EXIT_GATE


if __name__ == "__main__":
    sys.exit(main())
