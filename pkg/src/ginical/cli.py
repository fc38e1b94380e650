"""Command-line interface.

Input files are CSV with a header containing at least the columns ``y``
(response) and ``mu`` (prediction).  Payloads go to stdout, logs and errors
to stderr.  Exit codes: 0 ok, 1 parse/usage error, 2 degenerate input,
3 calibration check failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import autocal, curves, gini, sim
from .core import (
    Dataset,
    DegenerateResponse,
    DomainError,
    GiniError,
    PreconditionFailed,
    TiePolicy,
    TiesNotAllowed,
)

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_DEGENERATE = 2
EXIT_CALIBRATION_FAIL = 3

log = logging.getLogger("ginical")


class ParseError(GiniError):
    code = "parse_error"


def _exit_code(exc: GiniError) -> int:
    if isinstance(exc, (DegenerateResponse, TiesNotAllowed, DomainError, PreconditionFailed)):
        return EXIT_DEGENERATE
    return EXIT_PARSE


def read_table(path: str) -> tuple[list[str], list[list[str]], Dataset]:
    """Read a ``y,mu`` CSV; returns header, raw rows and the dataset."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        for col in ("y", "mu"):
            if col not in header:
                raise ParseError(f"{path}: line 1: header lacks column {col!r}")
        iy, im = header.index("y"), header.index("mu")
        rows, ys, ms = [], [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: line {line}: expected {len(header)} fields, got {len(row)}")
            try:
                y, m = float(row[iy]), float(row[im])
            except ValueError:
                raise ParseError(f"{path}: line {line}: non-numeric value") from None
            if not (math.isfinite(y) and math.isfinite(m)):
                raise ParseError(f"{path}: line {line}: non-finite value")
            rows.append(row)
            ys.append(y)
            ms.append(m)
    return header, rows, Dataset(ys, ms)


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def cmd_score(args) -> int:
    _, _, ds = read_table(args.input)
    ties = TiePolicy(args.ties)
    if args.binary:
        if args.denominator not in (None, "binary"):
            raise ParseError("--binary implies --denominator binary")
        report = gini.gini_binary(ds, ties)
    else:
        method = gini.DenominatorMethod(args.denominator or "self-cap")
        report = gini.gini_ml(ds, method, ties)
    _write(_json(report.to_dict()), None)
    return EXIT_OK


def cmd_curves(args) -> int:
    _, _, ds = read_table(args.input)
    grid = None
    if args.grid is not None:
        if args.grid < 2:
            raise ParseError("--grid must be at least 2")
        grid = np.arange(1, args.grid, dtype=np.float64) / args.grid
    if args.kind == "lorenz":
        curve = curves.lorenz_curve(ds.predictions, grid)
    else:
        curve = curves.cap_curve(ds, grid, TiePolicy(args.ties))
        if args.kind == "mirrored-cap":
            curve = curves.mirrored_cap(curve)
    _write(curve.to_csv(), args.out)
    return EXIT_OK


def cmd_recalibrate(args) -> int:
    header, rows, ds = read_table(args.input)
    method = autocal.parse_method(args.method)
    fitted = autocal.recalibrate(ds, method)
    lines = [",".join(header + ["mu_auto"])]
    for row, value in zip(rows, fitted.tolist()):
        lines.append(",".join(row + [repr(value)]))
    _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_check(args) -> int:
    _, _, ds = read_table(args.input)
    report = autocal.calibration_report(ds, args.bins, args.tol)
    _write(_json(report.to_dict()), None)
    if args.bins_csv:
        Path(args.bins_csv).write_text(report.bins_to_csv(), encoding="utf-8")
    return EXIT_OK if report.passed else EXIT_CALIBRATION_FAIL


def cmd_simulate(args) -> int:
    config = sim.load_config(args.config)
    env_seed = os.environ.get("SEED")
    if env_seed:
        try:
            config = sim.with_seed(config, int(env_seed))
        except ValueError:
            raise ParseError(f"SEED={env_seed!r} is not an integer") from None
    log.info("running %d replications of %s", config.replications, config.generator.kind.value)
    report = sim.run_experiment(config, threads=args.threads)
    _write(_json(report.to_dict()), args.out)
    if args.csv:
        Path(args.csv).write_text(report.replication_csv(), encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ginical", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="Gini indices, AUC and Somers' D as JSON")
    p.add_argument("input")
    p.add_argument("--binary", action="store_true", help="0/1 responses; adds the AUC check")
    p.add_argument("--denominator", choices=["self-cap", "pairwise", "binary"])
    p.add_argument("--ties", choices=["strict", "midrank"], default="midrank")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("curves", help="CAP, mirrored CAP or Lorenz curve as CSV")
    p.add_argument("input")
    p.add_argument("--kind", choices=["cap", "lorenz", "mirrored-cap"], default="cap")
    p.add_argument("--grid", type=int, help="evaluate at k/GRID (default: sample resolution)")
    p.add_argument("--ties", choices=["strict", "midrank"], default="midrank")
    p.add_argument("--out")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("recalibrate", help="append an auto-calibrated column mu_auto")
    p.add_argument("input")
    p.add_argument("--method", default="isotonic", help="isotonic | bins:K")
    p.add_argument("--out")
    p.set_defaults(func=cmd_recalibrate)

    p = sub.add_parser("check", help="binned auto-calibration diagnosis")
    p.add_argument("input")
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-2, help="relative to mean(y)")
    p.add_argument("--bins-csv", help="also write the bin table as CSV")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", help="run a model-selection experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--csv", help="per-replication metric table")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except GiniError as exc:
        sys.stderr.write(json.dumps({"error": exc.code, "message": str(exc)}) + "\n")
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
