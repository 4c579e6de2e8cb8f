"""Command line entry point: ``msfem-transport {assemble,solve,sweep,compare}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from ..errors import AssemblyError, ConfigError, InvalidMediaError, MetricError, SolverError
from .config import load_config
from .experiments import assemble_only, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3

ACCEPTED = {
    "solve": ("single_run",),
    "sweep": ("eps_sweep", "delta_sweep", "resolution_consistency"),
    "compare": ("formulation_compare",),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msfem-transport", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("assemble", "build and cache the spatial matrices of a config"),
        ("solve", "run a single transport solve"),
        ("sweep", "run an eps, delta or resolution sweep"),
        ("compare", "compare the symmetric and asymmetric formulations"),
    ]:
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--cache", help="matrix cache directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
        p.add_argument("--no-cache", action="store_true", help="ignore the matrix cache")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.config)
        if args.out:
            cfg = replace(cfg, out=args.out)
        use_cache = not args.no_cache
        if args.command == "assemble":
            summary = assemble_only(cfg, args.cache, use_cache)
            print(json.dumps(summary, indent=2, sort_keys=True))
            return EXIT_OK
        if cfg.kind not in ACCEPTED[args.command]:
            raise ConfigError(f"'{args.command}' cannot run a {cfg.kind!r} experiment; "
                              f"expected one of {ACCEPTED[args.command]}")
        report = run_experiment(cfg, args.cache, args.threads, cfg.out, use_cache)
    except (ConfigError, InvalidMediaError, MetricError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, AssemblyError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    for run in report["runs"]:
        print(json.dumps({"params": run["params"], "errors": run["errors"]}, sort_keys=True))
    for rate in report["rates"]:
        print(f"rate[{rate['name']}]: slope {rate['slope']:.3f} (residual {rate['residual']:.2e})")
    print(f"report written to {cfg.out}/report.json")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
