"""Command-line entry point.

    mixqas run <config.json> [--set key=value ...] [--seeds a,b,c] [--out DIR]
    mixqas export-circuit <architecture.json> --format qasm|json [--out FILE]
    mixqas verify

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import export
from .harness import ConfigError, load_config, parse_override, run_experiment


def _cmd_run(args):
    overrides = dict(parse_override(item) for item in args.set or [])
    if args.seeds:
        overrides["seeds"] = [int(s) for s in args.seeds.split(",")]
    if args.out:
        overrides["out_dir"] = args.out
    config = load_config(args.config, overrides)
    records = run_experiment(config)
    print(f"wrote {len(records)} run(s) to {config.out_dir}")
    return 0


def _cmd_export(args):
    record = export.load_architecture(args.architecture)
    if args.format == "qasm":
        text = export.to_qasm(record)
    else:
        text = json.dumps(record, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_verify(args):
    from .verify import run_all

    return 0 if run_all() else 3


def build_parser():
    parser = argparse.ArgumentParser(prog="mixqas", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured experiment")
    p_run.add_argument("config", help="path to a JSON configuration file")
    p_run.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config entry (JSON-typed value)")
    p_run.add_argument("--seeds", help="comma-separated repetition seeds")
    p_run.add_argument("--out", help="output directory override")
    p_run.set_defaults(fn=_cmd_run)

    p_exp = sub.add_parser("export-circuit", help="render an architecture record")
    p_exp.add_argument("architecture", help="architecture_<run>.json path")
    p_exp.add_argument("--format", choices=("qasm", "json"), default="qasm")
    p_exp.add_argument("--out", help="write to a file instead of stdout")
    p_exp.set_defaults(fn=_cmd_export)

    p_ver = sub.add_parser("verify", help="run the property-test oracle suite")
    p_ver.set_defaults(fn=_cmd_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
