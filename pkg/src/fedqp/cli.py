"""Command-line experiment harness.

Verbs:
    fedqp run <config.json> [--set key=value ...]
    fedqp sweep <config.json> --axis <name> --values v1,v2,... [--set ...]
    fedqp report <run-or-sweep-dir>

Precedence for settings: --set flag > config file > built-in default.
Exits 0 on success; on failure prints one machine-readable line
``error: {"message": ...}`` to stderr and exits nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import (
    ConfigError,
    SWEEP_AXES,
    SweepSpec,
    apply_overrides,
    parse_sweep_values,
    resolve,
)
from .runner import report_lines, run, sweep


def _load_raw(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config parse error in {path}: {err}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return raw


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedqp",
        description="Federated learning simulator with QP-guided model mutation",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="execute one config over its seed list")
    p_run.add_argument("config", help="path to a JSON config file")
    p_run.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="override a config key (dotted path); may repeat",
    )
    p_run.add_argument("--output-dir", default=None, help="override the output directory")

    p_sweep = sub.add_parser("sweep", help="run one config per axis value")
    p_sweep.add_argument("config", help="path to a JSON config file")
    p_sweep.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p_sweep.add_argument(
        "--values", required=True, help="comma-separated axis values, e.g. 0,0.25,0.5"
    )
    p_sweep.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
    )
    p_sweep.add_argument("--output-dir", default=None)

    p_report = sub.add_parser("report", help="verify and print a run or sweep directory")
    p_report.add_argument("run_dir", help="path to a run or sweep directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "run":
            raw = apply_overrides(_load_raw(args.config), args.overrides)
            if args.output_dir:
                raw["output_dir"] = args.output_dir
            cfg = resolve(raw)
            result = run(cfg)
            s = result.summary["final_accuracy"]
            print(f"run dir: {result.run_dir}")
            print(f"config hash: {result.config_hash}")
            print(f"final accuracy: {s['mean']:.4f} +/- {s['std']:.4f} over {len(cfg.seeds)} seed(s)")
            return 0
        if args.verb == "sweep":
            raw = apply_overrides(_load_raw(args.config), args.overrides)
            if args.output_dir:
                raw["output_dir"] = args.output_dir
            values = parse_sweep_values(args.axis, [v for v in args.values.split(",") if v])
            spec = SweepSpec(axis=args.axis, values=values)
            result = sweep(raw, spec)
            print(f"sweep dir: {result.sweep_dir}")
            for row in result.rows:
                print(
                    f"{args.axis}={row['axis_value']}: "
                    f"accuracy {row['mean_final_accuracy']:.4f} +/- {row['std_final_accuracy']:.4f}"
                )
            return 0
        if args.verb == "report":
            for line in report_lines(Path(args.run_dir)):
                print(line)
            return 0
        raise ConfigError(f"unknown verb {args.verb!r}")
    except (ConfigError, ValueError, OSError) as err:
        print("error: " + json.dumps({"message": str(err)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
