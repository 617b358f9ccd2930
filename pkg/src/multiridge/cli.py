"""``multiridge`` command line: experiment runners and the property suite."""

from __future__ import annotations

import argparse
import logging
import sys

import yaml

from .core import InvalidInputError
from .experiments import (ConfigError, load_config, run_experiment1, run_experiment3,
                          run_gradient_bench)
from .verify import format_report, run_verify

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

_RUNNERS = {
    "experiment1": run_experiment1,
    "gradient-bench": run_gradient_bench,
    "experiment3": run_experiment3,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="multiridge")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML file overriding the defaults")
        p.add_argument("--out", default=f"results/{name}", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int, default=1)
        if name == "gradient-bench":
            p.add_argument("--precision", choices=["f64", "f32"],
                           help="run a single precision instead of both")
    v = sub.add_parser("verify")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--instances", type=int, default=50)
    v.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "verify":
        results = run_verify(args.seed, args.instances, args.corrupt_gradient)
        print(format_report(results))
        return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL

    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    overrides = {"seed": args.seed}
    if getattr(args, "precision", None):
        overrides["precisions"] = [args.precision]
    try:
        cfg = load_config(args.command, args.config, **overrides)
        record = _RUNNERS[args.command](cfg, args.out, args.threads)
    except (ConfigError, InvalidInputError, yaml.YAMLError, OSError, KeyError,
            TypeError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {args.out}/results.csv ({len(record.results)} rows)")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
