"""Command line entry point.

    rmtedge --config exp.cfg [--kind K] [--out DIR] [--seed S] [--resolution G] [--jobs J]
    rmtedge diff A.csv B.csv [--tol T]

Exit codes: 0 all checks pass, 1 some check failed (or drift above --tol),
2 usage or configuration error, 3 numerical or I/O error during the run.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
import traceback
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import KINDS, ConfigError, load_config
from .experiments import Report, run
from .orthopoly import CACHE_ENV

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_ERROR = 0, 1, 2, 3


class SchemaMismatch(ValueError):
    """Two reports do not share columns and row count."""


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(report: Report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(report.columns)
        for row in report.rows:
            w.writerow([_cell(v) for v in row])


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_json(obj, path):
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def metadata(report: Report, cfg):
    """Everything except timings, so the file is reproducible from (config, seed, version)."""
    return {"kind": report.kind, "passed": report.passed, "checks": report.checks,
            "meta": report.meta, "config": cfg.to_dict(), "columns": list(report.columns),
            "versions": {"rmtedge": __version__, "numpy": np.__version__,
                         "scipy": scipy.__version__}}


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaMismatch(f"{path} is empty")
    return rows[0], rows[1:]


def diff_reports(a, b):
    """Per-column max absolute drift between two CSV reports of the same shape.

    Non-numeric columns count as drift inf when any cell differs, 0 otherwise.
    """
    ha, ra = read_csv(a)
    hb, rb = read_csv(b)
    if ha != hb:
        raise SchemaMismatch(f"columns differ: {ha} vs {hb}")
    if len(ra) != len(rb):
        raise SchemaMismatch(f"row counts differ: {len(ra)} vs {len(rb)}")
    drift = {}
    for j, name in enumerate(ha):
        worst = 0.0
        for r1, r2 in zip(ra, rb):
            try:
                x, y = float(r1[j]), float(r2[j])
            except ValueError:
                worst = max(worst, 0.0 if r1[j] == r2[j] else math.inf)
                continue
            if math.isnan(x) and math.isnan(y):
                continue
            worst = max(worst, abs(x - y) if not (math.isnan(x) or math.isnan(y)) else math.inf)
        drift[name] = worst
    return drift


def _run_parser():
    p = argparse.ArgumentParser(prog="rmtedge", description=(
        "Run an edge-universality experiment and write <kind>.csv, <kind>.json and timings.json. "
        f"Recurrence tables are cached in ${CACHE_ENV} when set. "
        "Use 'rmtedge diff A.csv B.csv' to compare two reports."))
    p.add_argument("--config", required=True, help="key = value experiment file")
    p.add_argument("--kind", choices=KINDS, help="override the experiment kind")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--seed", type=int, help="random seed (unsigned 64-bit)")
    p.add_argument("--resolution", type=int, help="quadrature nodes g")
    p.add_argument("--jobs", type=int, default=1, help="worker processes across the n ladder")
    return p


def _diff_parser():
    p = argparse.ArgumentParser(prog="rmtedge diff",
                                description="Per-column max absolute drift between two reports.")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--tol", type=float, help="exit 1 when any drift exceeds this")
    return p


def _error(kind, exc, out=None):
    report = {"error": type(exc).__name__, "message": str(exc), "kind": kind}
    if out is not None:
        try:
            write_json(report | {"traceback": traceback.format_exc()}, Path(out) / "error.json")
        except OSError:
            pass
    print(json.dumps(report), file=sys.stderr)


def main_diff(argv):
    args = _diff_parser().parse_args(argv)
    try:
        drift = diff_reports(args.a, args.b)
    except SchemaMismatch as exc:
        _error("diff", exc)
        return EXIT_USAGE
    except OSError as exc:
        _error("diff", exc)
        return EXIT_ERROR
    print(json.dumps(_jsonable(drift), indent=2))
    if args.tol is not None and any(v > args.tol for v in drift.values()):
        return EXIT_FAIL
    return EXIT_OK


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    if argv and argv[0] == "diff":
        return main_diff(argv[1:])
    parser = _run_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    overrides = {"kind": args.kind, "seed": args.seed, "resolution": args.resolution}
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"rmtedge: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        _error(cfg.kind, exc)
        return EXIT_ERROR

    t0 = time.perf_counter()
    try:
        report = run(cfg, jobs=max(1, args.jobs))
    except Exception as exc:  # any module failure becomes a structured report
        _error(cfg.kind, exc, out)
        return EXIT_ERROR
    elapsed = time.perf_counter() - t0

    write_csv(report, out / f"{cfg.kind}.csv")
    write_json(metadata(report, cfg), out / f"{cfg.kind}.json")
    write_json({"kind": cfg.kind, "seconds": elapsed}, out / "timings.json")
    for c in report.checks:
        flag = "PASS" if c["passed"] else "FAIL"
        print(f"{flag} {c['name']}" + ("" if c["value"] is None else f" value={c['value']:.4g}"))
    return EXIT_OK if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
