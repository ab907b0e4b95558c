"""Command line entry point: ``pqprune {gen,bench,sweepk,sweepbs,heatmap}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import bench
from .builder import gen_workload
from .core import InputError
from .prune import PruneConfig, parse_mode
from .storage import StorageError, load_workload, save_workload

log = logging.getLogger("pqprune")


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("values must be positive integers")
    return values


def _methods(text: str) -> list[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    unknown = set(methods) - set(bench.METHODS)
    if unknown or not methods:
        raise argparse.ArgumentTypeError(f"methods must be drawn from {','.join(bench.METHODS)}")
    return methods


def _timing_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workload", required=True, type=Path)
    p.add_argument("--queries", type=int, default=bench.SAMPLES, help="timed requests per configuration")
    p.add_argument("--warmup", type=int, default=bench.WARMUP, help="discarded requests before timing")
    p.add_argument("--out", required=True, type=Path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pqprune", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic workload directory")
    p.add_argument("--items", type=int, required=True)
    p.add_argument("--users", type=int, required=True)
    p.add_argument("--splits", type=int, default=8)
    p.add_argument("--subids", type=int, default=256)
    p.add_argument("--dim", type=int, default=512)
    p.add_argument("--skew", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--num-queries", type=int, default=bench.WARMUP + bench.SAMPLES)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("bench", help="compare scoring methods")
    _timing_args(p)
    p.add_argument("--methods", type=_methods, default=list(bench.METHODS))
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--bs", type=int, default=8)
    p.add_argument("--mode", type=parse_mode, default=parse_mode("safe"))
    p.add_argument("--threads", type=int, default=0, help="also measure throughput with N concurrent requests")

    p = sub.add_parser("sweepk", help="vary the ranking cutoff")
    _timing_args(p)
    p.add_argument("--ks", type=_int_list, default=[1, 10, 100])
    p.add_argument("--bs", type=int, default=8)

    p = sub.add_parser("sweepbs", help="vary the pruning batch size")
    _timing_args(p)
    p.add_argument("--bs", type=_int_list, default=[1, 2, 4, 8, 16, 64])
    p.add_argument("--k", type=int, default=10)

    p = sub.add_parser("heatmap", help="dump score-sorted sub-ids for one query")
    p.add_argument("--workload", required=True, type=Path)
    p.add_argument("--query", type=int, required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--bs", type=int, default=8)
    p.add_argument("--out", required=True, type=Path)
    return parser


def summary_path(out: Path) -> Path:
    return out.with_name(out.stem + "_summary.csv")


def run(args: argparse.Namespace) -> None:
    if args.command == "gen":
        wl = gen_workload(args.items, args.users, args.splits, args.subids, args.dim,
                          args.skew, args.seed, args.num_queries)
        save_workload(wl, args.out)
        log.info("wrote %d-item workload with %d queries to %s", wl.codebook.num_items, wl.num_queries, args.out)
        return

    wl = load_workload(args.workload)
    if args.command == "bench":
        cfg = PruneConfig(args.k, args.bs, args.mode)
        report = bench.bench_methods(wl, args.methods, cfg, args.queries, args.warmup, args.threads)
    elif args.command == "sweepk":
        report = bench.sweep_cutoff(wl, args.ks, batch_size=args.bs, samples=args.queries, warmup=args.warmup)
    elif args.command == "sweepbs":
        report = bench.sweep_batch(wl, args.bs, k=args.k, samples=args.queries, warmup=args.warmup)
    else:
        rows, summary = bench.export_heatmap(wl, args.query, args.k, args.bs)
        bench.write_csv(args.out, bench.HEATMAP_HEADER, rows)
        bench.write_csv(summary_path(args.out), bench.SUMMARY_HEADER, [[summary[h] for h in bench.SUMMARY_HEADER]])
        log.info("query %d: %s after %d iterations", args.query, summary["difficulty"], summary["iterations"])
        return
    report.to_csv(args.out)
    for row in report.rows:
        log.info("%-7s k=%-4d bs=%-4s median %.3fms p95 %.3fms unique %.2f%%",
                 row.method, row.k, row.batch_size or "-", row.median_ms, row.p95_ms, row.scored_unique_pct)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        run(args)
    except (InputError, StorageError, ValueError, IndexError) as exc:
        print(f"pqprune: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
