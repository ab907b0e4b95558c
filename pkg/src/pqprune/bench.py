"""Latency benchmarks: method comparison, cutoff and batch-size sweeps, heatmaps.

Every method sees the same query stream. The first ``warmup`` requests are
discarded; percentiles use the nearest-rank definition. Timings cover
sub-score precomputation plus top-K selection and exclude producing the
sequence embedding. For the dense method the item embedding matrix is
reconstructed once up front and not timed.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .builder import SyntheticWorkload
from .core import ScoringStats, TopKResult, dense_topk, pqtopk, precompute_sub_scores
from .prune import (
    InvertedIndexes,
    PruneConfig,
    build_inverted_indexes,
    format_mode,
    overlap_at_k,
    recjpqprune,
)

METHODS = ("dense", "pqtopk", "prune")
WARMUP = 10
SAMPLES = 100


def nearest_rank(values: Sequence[float], pct: float) -> float:
    """Smallest value with at least ``pct`` percent of samples at or below it."""
    return float(np.percentile(np.asarray(values, dtype=np.float64), pct, method="inverted_cdf"))


def gini(values: np.ndarray) -> float:
    """Gini coefficient of non-negative values (negatives clipped to zero)."""
    x = np.sort(np.clip(np.asarray(values, dtype=np.float64), 0.0, None))
    n, total = len(x), x.sum()
    if n == 0 or total == 0:
        return 0.0
    return float(2.0 * np.sum(np.arange(1, n + 1) * x) / (n * total) - (n + 1) / n)


@dataclass
class BenchRow:
    method: str
    k: int
    batch_size: int | None
    mode: str | None
    samples: int
    warmup: int
    median_ms: float
    p95_ms: float
    scored_total_pct: float
    scored_unique_pct: float
    iter_mean: float
    iter_median: float
    iter_p95: float
    iter_max: int
    exact_match: float
    overlap: float
    throughput_qps: float | None = None


@dataclass
class BenchReport:
    rows: list[BenchRow]

    def row(self, method: str, **match) -> BenchRow:
        for r in self.rows:
            if r.method == method and all(getattr(r, key) == v for key, v in match.items()):
                return r
        raise KeyError((method, match))

    def to_csv(self, path) -> None:
        write_csv(path, [f.name for f in fields(BenchRow)], (asdict(r).values() for r in self.rows))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Iterable]) -> None:
    with open(Path(path), "w", encoding="utf-8", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([_fmt(v) for v in row])


class Bench:
    """Shared read-only scoring structures for one workload."""

    def __init__(self, workload: SyntheticWorkload):
        self.workload = workload
        self.cb = workload.codebook
        self.inv: InvertedIndexes = build_inverted_indexes(self.cb)
        self._dense = None
        self._reference: dict[int, list[TopKResult]] = {}

    @property
    def item_embeddings(self) -> np.ndarray:
        if self._dense is None:
            self._dense = self.cb.item_embeddings()
        return self._dense

    def stream(self, n: int) -> list[np.ndarray]:
        q = self.workload.queries
        if len(q) == 0:
            raise ValueError("workload has no queries")
        return [q[i % len(q)] for i in range(n)]

    def reference(self, k: int) -> list[TopKResult]:
        """Exhaustive top-``k`` per distinct workload query (untimed)."""
        if k not in self._reference:
            self._reference[k] = [pqtopk(self.cb, precompute_sub_scores(self.cb, phi), k) for phi in self.workload.queries]
        return self._reference[k]

    def score(self, method: str, phi: np.ndarray, cfg: PruneConfig) -> tuple[TopKResult, ScoringStats]:
        cb = self.cb
        if method == "dense":
            res = dense_topk(cb, phi, cfg.k, self.item_embeddings)
            return res, ScoringStats(1, cb.num_items, cb.num_items)
        if method == "pqtopk":
            res = pqtopk(cb, precompute_sub_scores(cb, phi), cfg.k)
            return res, ScoringStats(1, cb.num_items, cb.num_items)
        if method == "prune":
            res, stats, _ = recjpqprune(cb, self.inv, precompute_sub_scores(cb, phi), cfg)
            return res, stats
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")

    def run(self, method: str, cfg: PruneConfig, samples: int = SAMPLES, warmup: int = WARMUP) -> BenchRow:
        if method == "dense":
            self.item_embeddings  # build outside the timed region
        reference = self.reference(cfg.k)
        nq = self.workload.num_queries
        times, iters, total, unique, exact, overlap = [], [], [], [], [], []
        for i, phi in enumerate(self.stream(warmup + samples)):
            t0 = time.perf_counter_ns()
            res, stats = self.score(method, phi, cfg)
            dt = time.perf_counter_ns() - t0
            if i < warmup:
                continue
            ref = reference[i % nq]
            times.append(dt / 1e6)
            iters.append(stats.iterations)
            total.append(stats.items_scored_total)
            unique.append(stats.items_scored_unique)
            exact.append(len(res) == len(ref) and bool(np.array_equal(res.ids, ref.ids)))
            overlap.append(overlap_at_k(res, ref, cfg.k))
        n = self.cb.num_items
        pruned = method == "prune"
        return BenchRow(
            method=method,
            k=cfg.k,
            batch_size=cfg.batch_size if pruned else None,
            mode=format_mode(cfg.mode) if pruned else None,
            samples=samples,
            warmup=warmup,
            median_ms=nearest_rank(times, 50),
            p95_ms=nearest_rank(times, 95),
            scored_total_pct=100.0 * float(np.mean(total)) / n,
            scored_unique_pct=100.0 * float(np.mean(unique)) / n,
            iter_mean=float(np.mean(iters)),
            iter_median=nearest_rank(iters, 50),
            iter_p95=nearest_rank(iters, 95),
            iter_max=int(np.max(iters)),
            exact_match=float(np.mean(exact)),
            overlap=float(np.mean(overlap)),
        )

    def throughput(self, method: str, cfg: PruneConfig, threads: int, requests: int) -> float:
        """Requests per second with ``threads`` concurrent workers."""
        if method == "dense":
            self.item_embeddings
        stream = self.stream(requests)
        t0 = time.perf_counter()
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda phi: self.score(method, phi, cfg), stream))
        return requests / (time.perf_counter() - t0)


def bench_methods(
    workload: SyntheticWorkload | Bench,
    methods: Sequence[str] = METHODS,
    cfg: PruneConfig = PruneConfig(),
    samples: int = SAMPLES,
    warmup: int = WARMUP,
    threads: int = 0,
) -> BenchReport:
    bench = workload if isinstance(workload, Bench) else Bench(workload)
    rows = []
    for method in methods:
        row = bench.run(method, cfg, samples, warmup)
        if threads > 1:
            row.throughput_qps = bench.throughput(method, cfg, threads, samples)
        rows.append(row)
    return BenchReport(rows)


def sweep_cutoff(
    workload: SyntheticWorkload | Bench,
    ks: Sequence[int],
    methods: Sequence[str] = ("pqtopk", "prune"),
    batch_size: int = 8,
    samples: int = SAMPLES,
    warmup: int = WARMUP,
) -> BenchReport:
    bench = workload if isinstance(workload, Bench) else Bench(workload)
    rows = []
    for k in ks:
        rows.extend(bench_methods(bench, methods, PruneConfig(k, batch_size), samples, warmup).rows)
    return BenchReport(rows)


def sweep_batch(
    workload: SyntheticWorkload | Bench,
    batch_sizes: Sequence[int],
    k: int = 10,
    samples: int = SAMPLES,
    warmup: int = WARMUP,
) -> BenchReport:
    bench = workload if isinstance(workload, Bench) else Bench(workload)
    return BenchReport([bench.run("prune", PruneConfig(k, bs), samples, warmup) for bs in batch_sizes])


HEATMAP_HEADER = ("split", "rank_within_split", "subid", "score")
SUMMARY_HEADER = ("query", "iterations", "scored_total_pct", "scored_unique_pct", "split_max_gini", "difficulty")


def classify_difficulty(unique_pct: float) -> str:
    if unique_pct <= 5.0:
        return "fast"
    if unique_pct >= 50.0:
        return "slow"
    return "average"


def export_heatmap(
    workload: SyntheticWorkload | Bench,
    query_index: int,
    k: int = 10,
    batch_size: int = 8,
) -> tuple[list[tuple[int, int, int, float]], dict]:
    """Score-sorted sub-ids per split for one query, plus how hard it was to prune.

    Returns ``(rows, summary)`` where rows are ``(split, rank, subid, score)``.
    """
    bench = workload if isinstance(workload, Bench) else Bench(workload)
    queries = bench.workload.queries
    if not 0 <= query_index < len(queries):
        raise IndexError(f"query {query_index} outside [0, {len(queries)})")
    cb = bench.cb
    s = precompute_sub_scores(cb, queries[query_index])
    order = np.argsort(-s, axis=1, kind="stable")
    rows = [
        (m, r, int(order[m, r]), float(s[m, order[m, r]]))
        for m in range(cb.num_splits)
        for r in range(cb.num_subids)
    ]
    _, stats, _ = recjpqprune(cb, bench.inv, s, PruneConfig(k, batch_size))
    unique_pct = 100.0 * stats.items_scored_unique / cb.num_items
    summary = {
        "query": query_index,
        "iterations": stats.iterations,
        "scored_total_pct": 100.0 * stats.items_scored_total / cb.num_items,
        "scored_unique_pct": unique_pct,
        "split_max_gini": gini(s.max(axis=1)),
        "difficulty": classify_difficulty(unique_pct),
    }
    return rows, summary
