"""Command-line interface.

Subcommands:
    convert   map a source embedding file onto a target one
    sweep     ablation over methods and k values, with JSONL/CSV reports
    plan      solve and export the transport plan as an EMB1 matrix
    fad       Frechet distance between the Gaussian fits of two files
    inspect   print header fields and basic stats of an EMB1 file

Exit codes: 0 success, 2 configuration error, 3 input-format error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .embio import HEADER_SIZE, load_embeddings
from .errors import (
    ConfigError,
    DimMismatch,
    EmbIoError,
    KOutOfRange,
    NonUniformMarginals,
    SqrtFailure,
    TooFewSamples,
    TooLarge,
)
from .frechet import frechet_distance, gaussian_stats
from .pipeline import ConvertConfig, convert, export_plan, sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otalign",
        description="Align embedding sets with discrete entropic optimal transport.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_convert = sub.add_parser("convert", help="map source embeddings onto a target set")
    _add_io_flags(p_convert)
    p_convert.add_argument("--output", type=Path, required=True, help="mapped EMB1 output path")
    p_convert.add_argument(
        "--method", required=True, choices=["knn", "ot-ave", "ot-bar"], help="mapping strategy"
    )
    p_convert.add_argument("--k", type=int, default=4, help="neighbors per source row (default 4)")
    _add_solver_flags(p_convert)
    p_convert.add_argument("--report", type=Path, help="write a JSON diagnostics report here")
    p_convert.set_defaults(func=_cmd_convert)

    p_sweep = sub.add_parser("sweep", help="ablate methods and k values")
    _add_io_flags(p_sweep)
    p_sweep.add_argument(
        "--methods", default="knn,ot-ave,ot-bar", help="comma-separated methods to run"
    )
    p_sweep.add_argument(
        "--ks", default="1,3,4,5,10,40", help="comma-separated k values to run"
    )
    _add_solver_flags(p_sweep)
    p_sweep.add_argument("--report", type=Path, required=True, help="JSONL report path")
    p_sweep.add_argument("--csv", type=Path, help="CSV summary path (default: report with .csv)")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_plan = sub.add_parser("plan", help="export the transport plan as an EMB1 matrix")
    _add_io_flags(p_plan)
    p_plan.add_argument("--output", type=Path, required=True, help="plan EMB1 output path")
    _add_solver_flags(p_plan)
    p_plan.set_defaults(func=_cmd_plan)

    p_fad = sub.add_parser("fad", help="Frechet distance between two embedding files")
    p_fad.add_argument("reference", type=Path)
    p_fad.add_argument("candidate", type=Path)
    p_fad.set_defaults(func=_cmd_fad)

    p_inspect = sub.add_parser("inspect", help="print header and stats of an EMB1 file")
    p_inspect.add_argument("file", type=Path)
    p_inspect.set_defaults(func=_cmd_inspect)

    return parser


def _add_io_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--source", type=Path, required=True, help="source EMB1 file")
    p.add_argument("--target", type=Path, required=True, help="target EMB1 file")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=0.1, help="entropic regularization (default 0.1)")
    p.add_argument("--tol", type=float, default=1e-6, help="marginal L-inf tolerance (default 1e-6)")
    p.add_argument("--max-iter", type=int, default=10000, help="iteration cap (default 10000)")
    p.add_argument(
        "--cost", default="cosine", choices=["cosine", "sqeuclidean"], help="cost function"
    )
    p.add_argument("--threads", type=int, help="BLAS thread cap; 1 gives bit-reproducible runs")


def _cmd_convert(args: argparse.Namespace) -> int:
    cfg = ConvertConfig(
        source=args.source,
        target=args.target,
        output=args.output,
        method=args.method,
        k=args.k,
        epsilon=args.epsilon,
        tol=args.tol,
        max_iter=args.max_iter,
        cost=args.cost,
        report=args.report,
        threads=args.threads,
    )
    result = convert(cfg)
    print(f"wrote {args.output} ({result.mapped.rows}x{result.mapped.dims}, method={args.method})")
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    try:
        ks = [int(k) for k in args.ks.split(",") if k.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --ks value: {exc}") from exc
    if not methods or not ks:
        raise ConfigError("--methods and --ks must each name at least one entry")
    # Base config: sweep ignores the method/output fields and varies
    # method and k itself.
    cfg = ConvertConfig(
        source=args.source,
        target=args.target,
        output=args.report.with_suffix(".unused"),
        method="knn",
        epsilon=args.epsilon,
        tol=args.tol,
        max_iter=args.max_iter,
        cost=args.cost,
        threads=args.threads,
    )
    report = sweep(cfg, methods, ks)
    report.write_jsonl(args.report)
    csv_path = args.csv if args.csv is not None else args.report.with_suffix(".csv")
    report.write_csv(csv_path)
    for rec in report.records:
        if rec.skipped:
            print(f"{rec.method:7s} k={rec.k:<4d} skipped ({rec.reason})")
        else:
            print(f"{rec.method:7s} k={rec.k:<4d} frechet={rec.frechet:.6f}")
    print(f"wrote {args.report} and {csv_path}")
    return EXIT_OK


def _cmd_plan(args: argparse.Namespace) -> int:
    cfg = ConvertConfig(
        source=args.source,
        target=args.target,
        output=args.output,
        method="ot-bar",
        epsilon=args.epsilon,
        tol=args.tol,
        max_iter=args.max_iter,
        cost=args.cost,
        threads=args.threads,
    )
    export_plan(cfg)
    print(f"wrote {args.output}")
    return EXIT_OK


def _cmd_fad(args: argparse.Namespace) -> int:
    a = gaussian_stats(load_embeddings(args.reference))
    b = gaussian_stats(load_embeddings(args.candidate))
    print(f"{frechet_distance(a, b):.10g}")
    return EXIT_OK


def _cmd_inspect(args: argparse.Namespace) -> int:
    m = load_embeddings(args.file)
    info = {
        "path": str(args.file),
        "format": "EMB1",
        "version": 1,
        "dtype": "float32-le",
        "header_bytes": HEADER_SIZE,
        "rows": m.rows,
        "dims": m.dims,
        "payload_bytes": m.rows * m.dims * 4,
        "min": float(m.data.min()),
        "max": float(m.data.max()),
        "mean": float(m.data.mean()),
        "mean_row_norm": float(np.linalg.norm(m.data.astype(np.float64), axis=1).mean()),
    }
    print(json.dumps(info, indent=2))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, KOutOfRange, TooLarge, NonUniformMarginals) as exc:
        print(f"otalign: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EmbIoError, DimMismatch, TooFewSamples, FileNotFoundError, IsADirectoryError) as exc:
        print(f"otalign: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SqrtFailure, np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        print(f"otalign: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
