"""Run every JSON config under configs/ and print a one-line summary per run.

    python3 scripts/run_all.py [--out results] [--cache .cache] [--threads 2]
"""

import argparse
import logging
from dataclasses import replace
from pathlib import Path

from msfem_transport.harness.config import load_config
from msfem_transport.harness.experiments import run_experiment

ROOT = Path(__file__).resolve().parents[1]


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--configs", default=str(ROOT / "configs"))
    parser.add_argument("--out", default="results")
    parser.add_argument("--cache", default=None)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")

    for path in sorted(Path(args.configs).glob("*.json")):
        cfg = load_config(path)
        out = Path(args.out) / path.stem
        report = run_experiment(replace(cfg, out=str(out)), args.cache, args.threads, out)
        rates = ", ".join(f"{r['name']} slope {r['slope']:.3f}" for r in report["rates"]) or "-"
        print(f"{path.stem:24s} {cfg.kind:24s} {len(report['runs'])} runs  {rates}  "
              f"({report['wall_time']:.1f}s) -> {out}")


if __name__ == "__main__":
    main()
