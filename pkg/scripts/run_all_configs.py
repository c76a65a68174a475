"""Run every example config under configs/ through the CLI.

Usage: python scripts/run_all_configs.py [--out results] [--seed N] [--skip ssc,tail]
"""
import argparse
import pathlib
import sys

from maxweight_lab.cli import run

root = pathlib.Path(__file__).resolve().parents[1]
parser = argparse.ArgumentParser()
parser.add_argument("--out", default=str(root / "results"))
parser.add_argument("--seed", type=int, default=None)
parser.add_argument("--threads", type=int, default=1)
parser.add_argument("--skip", default="", help="comma-separated config stems to skip")
args = parser.parse_args()

import logging
logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
skip = {s for s in args.skip.split(",") if s}
codes = {}
for cfg in sorted((root / "configs").glob("*.json")):
    if cfg.stem.startswith("schedule_set") or cfg.stem in skip:
        continue
    codes[cfg.stem] = run(cfg, seed=args.seed, out=str(pathlib.Path(args.out) / cfg.stem), threads=args.threads)
for name, code in codes.items():
    print(f"{name:20s} exit {code}")
sys.exit(max(codes.values(), default=0))
