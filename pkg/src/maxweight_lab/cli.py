"""``maxweight-lab run <config.json> [--seed N] [--out DIR] [--threads K]``.

Writes ``<experiment>_report.json`` and ``<experiment>_series.csv`` into the
output directory.  Exit status: 0 success, 1 config or numerical error,
2 an asserted bound was violated.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .errors import InvalidParameterError, NumericalError, PreconditionError, SizeError
from .experiments import ExperimentConfig, run_experiment

log = logging.getLogger("maxweight_lab")

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, np.integer):
        return int(x)
    return x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def run(config_path, seed: int | None = None, out: str | None = None, threads: int = 1) -> int:
    path = Path(config_path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        log.error("cannot read config %s: %s", path, exc)
        return EXIT_ERROR
    if seed is not None:
        doc["seed"] = seed
    if out is not None:
        doc["output"] = out
    try:
        cfg = ExperimentConfig.from_dict(doc, base_dir=path.parent)
        result = run_experiment(cfg, threads=threads)
    except (InvalidParameterError, PreconditionError, SizeError, NumericalError, TypeError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_ERROR

    out_dir = Path(cfg.output)
    if not out_dir.is_absolute():
        out_dir = Path.cwd() / out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = cfg.experiment
    (out_dir / f"{stem}_report.json").write_text(
        json.dumps(_jsonable(result.report), indent=2, sort_keys=True) + "\n"
    )
    write_csv(out_dir / f"{stem}_series.csv", result.columns, result.rows)
    if not result.bounds_ok:
        log.error("%s: an asserted bound was violated; see %s", stem, out_dir / f"{stem}_report.json")
        return EXIT_VIOLATION
    log.info("%s: all checks passed -> %s", stem, out_dir)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="maxweight-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    return run(args.config, seed=args.seed, out=args.out, threads=args.threads)


if __name__ == "__main__":
    sys.exit(main())
