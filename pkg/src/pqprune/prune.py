"""Dynamic pruning over per-split inverted indexes.

Sub-ids are consumed in descending score order, a batch at a time from the
split whose best unconsumed sub-id scores highest. Every item listed under a
consumed sub-id is scored exhaustively. The loop stops once the sum of the
best unconsumed sub-score in each split (an upper bound on any item not yet
reached) falls below the k-th best score found so far.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Codebook,
    InputError,
    ScoringStats,
    TopKResult,
    check_sub_scores,
    gather_sum,
    select_topk,
)

NEG_INF = float("-inf")


@dataclass(frozen=True, eq=False)
class InvertedIndexes:
    """For every split, sub-id -> ascending item ids, stored CSR-style.

    ``items[m, offsets[m, b]:offsets[m, b + 1]]`` lists the items whose sub-id
    in split ``m`` is ``b``.
    """

    items: np.ndarray
    offsets: np.ndarray

    @property
    def num_splits(self) -> int:
        return self.items.shape[0]

    @property
    def num_items(self) -> int:
        return self.items.shape[1]

    @property
    def num_subids(self) -> int:
        return self.offsets.shape[1] - 1

    def postings(self, split: int, subid: int) -> np.ndarray:
        lo, hi = self.offsets[split, subid], self.offsets[split, subid + 1]
        return self.items[split, lo:hi]

    def gather(self, split: int, subids: np.ndarray) -> np.ndarray:
        row, off = self.items[split], self.offsets[split]
        parts = [row[off[b]:off[b + 1]] for b in subids]
        if len(parts) == 1:
            return parts[0]
        return np.concatenate(parts)


def build_inverted_indexes(cb: Codebook) -> InvertedIndexes:
    n, B = cb.num_items, cb.num_subids
    dtype = np.int32 if n < 2**31 else np.int64
    items = np.empty((cb.num_splits, n), dtype=dtype)
    offsets = np.zeros((cb.num_splits, B + 1), dtype=np.int64)
    for m in range(cb.num_splits):
        # stable sort keeps item ids ascending inside every posting list
        items[m] = np.argsort(cb.codes[m], kind="stable")
        np.cumsum(np.bincount(cb.codes[m], minlength=B), out=offsets[m, 1:])
    items.setflags(write=False)
    offsets.setflags(write=False)
    return InvertedIndexes(items, offsets)


@dataclass(frozen=True)
class Safe:
    pass


@dataclass(frozen=True)
class MaxIterations:
    limit: int

    def __post_init__(self):
        if self.limit < 1:
            raise InputError("iteration limit must be >= 1")


@dataclass(frozen=True)
class InflatedThreshold:
    factor: float

    def __post_init__(self):
        if not self.factor > 1:
            raise InputError("threshold inflation factor must be > 1")


Mode = Safe | MaxIterations | InflatedThreshold


def parse_mode(text: str) -> Mode:
    """``safe``, ``maxiter:L`` or ``inflate:F``."""
    name, _, arg = text.strip().partition(":")
    name = name.lower()
    try:
        if name == "safe" and not arg:
            return Safe()
        if name == "maxiter":
            return MaxIterations(int(arg))
        if name == "inflate":
            return InflatedThreshold(float(arg))
    except ValueError as exc:
        raise InputError(f"bad mode argument in {text!r}") from exc
    raise InputError(f"unknown pruning mode {text!r}")


def format_mode(mode: Mode) -> str:
    if isinstance(mode, MaxIterations):
        return f"maxiter:{mode.limit}"
    if isinstance(mode, InflatedThreshold):
        return f"inflate:{mode.factor:g}"
    return "safe"


@dataclass(frozen=True)
class PruneConfig:
    k: int = 10
    batch_size: int = 8
    mode: Mode = field(default_factory=Safe)

    def __post_init__(self):
        if self.k < 1:
            raise InputError("k must be >= 1")
        if self.batch_size < 1:
            raise InputError("batch size must be >= 1")


@dataclass(frozen=True)
class TraceStep:
    split: int
    subids: tuple[int, ...]
    sigma_before: float
    sigma_after: float
    theta_after: float
    items_scored: int


@dataclass
class PruneTrace:
    sigma_initial: float = NEG_INF
    steps: list[TraceStep] = field(default_factory=list)


def _sum_heads(heads: np.ndarray) -> float:
    # same split order and float32 accumulation as item scoring, so the bound
    # dominates every reachable item score exactly (float addition is monotone)
    acc = heads[0]
    for v in heads[1:]:
        acc = np.float32(acc + v)
    return float(acc)


def upper_bound(s: np.ndarray, sorted_subids: np.ndarray, positions) -> float:
    """Sum over splits of the score at each split's cursor.

    A cursor at ``B`` marks an exhausted split and forces the bound to -inf.
    """
    M, B = s.shape
    positions = np.asarray(positions)
    if np.any(positions < 0) or np.any(positions > B):
        raise InputError(f"cursor positions must lie in [0, {B}]")
    if np.any(positions == B):
        return NEG_INF
    heads = s[np.arange(M), sorted_subids[np.arange(M), positions]]
    return _sum_heads(heads.astype(np.float32))


def merge(current: TopKResult, incoming: TopKResult, k: int) -> TopKResult:
    """Union by item id (a repeated id carries the same score), cut to top ``k``."""
    if len(current) == 0:
        return select_topk(incoming.ids, incoming.scores, k)
    if len(incoming) == 0:
        return select_topk(current.ids, current.scores, k)
    ids = np.concatenate([current.ids, incoming.ids])
    scores = np.concatenate([current.scores, incoming.scores])
    ids, first = np.unique(ids, return_index=True)
    return select_topk(ids, scores[first], k)


def _keep_going(mode: Mode, sigma: float, theta: float, iterations: int) -> bool:
    if sigma == NEG_INF:
        # some split is exhausted, so every item has been scored
        return False
    # continue on equality: an unreached item could tie theta with a smaller id
    safe = sigma >= theta
    if isinstance(mode, MaxIterations):
        return safe and iterations < mode.limit
    if isinstance(mode, InflatedThreshold) and theta > 0:
        return sigma > mode.factor * theta
    return safe


def recjpqprune(
    cb: Codebook,
    inv: InvertedIndexes,
    s: np.ndarray,
    cfg: PruneConfig = PruneConfig(),
    trace: bool = False,
) -> tuple[TopKResult, ScoringStats, PruneTrace | None]:
    """Top-``cfg.k`` items by summed sub-scores without scoring the whole catalogue.

    In :class:`Safe` mode the result equals :func:`pqtopk` over all items,
    ids and order included. Returns ``(result, stats, trace)``; ``trace`` is
    None unless requested.
    """
    t0 = time.perf_counter_ns()
    s = check_sub_scores(cb, s)
    if (inv.num_splits, inv.num_items, inv.num_subids) != (cb.num_splits, cb.num_items, cb.num_subids):
        raise InputError("inverted indexes do not match the codebook")
    M, B = s.shape
    k, bs, mode = cfg.k, cfg.batch_size, cfg.mode

    order = np.argsort(-s, axis=1, kind="stable")
    # trailing -inf column is the exhausted-split sentinel
    ranked = np.full((M, B + 1), -np.inf, dtype=np.float32)
    ranked[:, :B] = np.take_along_axis(s, order, axis=1)
    pos = np.zeros(M, dtype=np.int64)
    heads = ranked[:, 0].copy()
    sigma = _sum_heads(heads)
    theta = NEG_INF

    result = TopKResult.empty()
    seen = np.zeros(cb.num_items, dtype=bool)
    stats = ScoringStats()
    log = PruneTrace(sigma_initial=sigma) if trace else None

    while _keep_going(mode, sigma, theta, stats.iterations):
        split = int(np.argmax(heads))  # first maximum: lowest split index wins ties
        start = pos[split]
        stop = min(start + bs, B)
        subids = order[split, start:stop]
        items = inv.gather(split, subids)
        if len(items):
            batch = select_topk(items, gather_sum(cb.codes, s, items), k)
            result = merge(result, batch, k)
            seen[items] = True
        pos[split] = stop
        heads[split] = ranked[split, stop]
        sigma_before, sigma = sigma, _sum_heads(heads)
        theta = result.kth_score(k)
        stats.iterations += 1
        stats.items_scored_total += len(items)
        if log is not None:
            log.steps.append(TraceStep(split, tuple(int(b) for b in subids), sigma_before, sigma, theta, len(items)))

    stats.items_scored_unique = int(np.count_nonzero(seen))
    stats.elapsed_ns = time.perf_counter_ns() - t0
    return result, stats, log


def overlap_at_k(result: TopKResult, reference: TopKResult, k: int) -> float:
    """Fraction of the reference top-``k`` ids present in ``result``'s top-``k``."""
    ref = reference.ids[:k]
    if len(ref) == 0:
        return 1.0
    return len(np.intersect1d(result.ids[:k], ref)) / len(ref)
