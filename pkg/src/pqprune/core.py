"""Codebook data model and the two exhaustive scoring paths.

An item embedding is the concatenation of ``num_splits`` sub-embeddings, one
picked per split by the item's sub-id. Scoring an item against a sequence
embedding can therefore go two ways:

* dense: reconstruct every item embedding and take dot products;
* sub-score lookup: precompute the ``num_splits x num_subids`` table of partial
  dot products once per request, then sum one table entry per split.

Indices are 0-based throughout. Scores are float32; equal scores are ordered
by ascending item id.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

MAX_SUBIDS = 65535


class InputError(ValueError):
    """Raised for malformed arguments (bad shapes, out-of-range ids)."""


@dataclass(frozen=True, eq=False)
class Codebook:
    """Item -> sub-id lookup plus per-split sub-embedding matrices.

    ``assignments`` has shape ``(num_items, num_splits)``; ``sub_embeddings``
    has shape ``(num_splits, num_subids, dim // num_splits)``. Both are stored
    read-only so a codebook can be shared across threads.
    """

    assignments: np.ndarray
    sub_embeddings: np.ndarray
    codes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        assignments = np.asarray(self.assignments)
        sub = np.asarray(self.sub_embeddings, dtype=np.float32)
        if assignments.ndim != 2 or assignments.shape[0] < 1 or assignments.shape[1] < 1:
            raise InputError(f"assignments must be a non-empty 2-D table, got shape {assignments.shape}")
        if sub.ndim != 3:
            raise InputError(f"sub_embeddings must be 3-D (splits, subids, subdim), got {sub.shape}")
        num_splits, num_subids, subdim = sub.shape
        if num_splits != assignments.shape[1]:
            raise InputError(
                f"assignments have {assignments.shape[1]} splits, sub_embeddings have {num_splits}")
        if num_subids < 1 or subdim < 1:
            raise InputError("need at least one sub-id and one dimension per split")
        if num_subids > MAX_SUBIDS:
            raise InputError(f"at most {MAX_SUBIDS} sub-ids per split are supported")
        if not np.issubdtype(assignments.dtype, np.integer):
            raise InputError("assignments must be integers")
        if assignments.min() < 0 or assignments.max() >= num_subids:
            raise InputError(f"assignment entries must lie in [0, {num_subids})")

        assignments = np.array(assignments, dtype=np.uint16, order="C")
        sub = np.array(sub, dtype=np.float32, order="C")
        codes = np.ascontiguousarray(assignments.T)
        for arr in (assignments, sub, codes):
            arr.setflags(write=False)
        object.__setattr__(self, "assignments", assignments)
        object.__setattr__(self, "sub_embeddings", sub)
        # split-major copy: one contiguous gather per split when scoring
        object.__setattr__(self, "codes", codes)

    @property
    def num_items(self) -> int:
        return self.assignments.shape[0]

    @property
    def num_splits(self) -> int:
        return self.assignments.shape[1]

    @property
    def num_subids(self) -> int:
        return self.sub_embeddings.shape[1]

    @property
    def subdim(self) -> int:
        return self.sub_embeddings.shape[2]

    @property
    def dim(self) -> int:
        return self.num_splits * self.subdim

    def check_item(self, item: int) -> int:
        item = int(item)
        if not 0 <= item < self.num_items:
            raise InputError(f"item id {item} outside [0, {self.num_items})")
        return item

    def item_embeddings(self) -> np.ndarray:
        """Reconstruct the full ``(num_items, dim)`` embedding matrix."""
        out = np.empty((self.num_items, self.dim), dtype=np.float32)
        w = self.subdim
        for m in range(self.num_splits):
            out[:, m * w:(m + 1) * w] = self.sub_embeddings[m][self.codes[m]]
        return out

    def equals(self, other: "Codebook") -> bool:
        """Bitwise equality of both tables."""
        return (
            self.assignments.shape == other.assignments.shape
            and self.sub_embeddings.shape == other.sub_embeddings.shape
            and self.assignments.tobytes() == other.assignments.tobytes()
            and self.sub_embeddings.tobytes() == other.sub_embeddings.tobytes()
        )


@dataclass(frozen=True, eq=False)
class TopKResult:
    """Score-descending ``(item_id, score)`` pairs, ties by ascending id."""

    ids: np.ndarray
    scores: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self) -> Iterator[tuple[int, float]]:
        return iter(self.entries)

    @property
    def entries(self) -> list[tuple[int, float]]:
        return [(int(i), float(s)) for i, s in zip(self.ids, self.scores)]

    def kth_score(self, k: int) -> float:
        """Score at rank ``k`` (1-based), or -inf if fewer than ``k`` entries."""
        if len(self.ids) < k:
            return float("-inf")
        return float(self.scores[k - 1])

    @classmethod
    def empty(cls) -> "TopKResult":
        return cls(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float32))


@dataclass
class ScoringStats:
    iterations: int = 0
    items_scored_total: int = 0
    items_scored_unique: int = 0
    elapsed_ns: int = 0


def _as_phi(cb: Codebook, phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=np.float32)
    if phi.ndim != 1 or phi.shape[0] != cb.dim:
        raise InputError(f"sequence embedding must have length {cb.dim}, got shape {phi.shape}")
    return phi


def _check_k(k: int) -> int:
    k = int(k)
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    return k


def select_topk(ids: np.ndarray, scores: np.ndarray, k: int) -> TopKResult:
    """Top-``k`` of already-distinct ids under the (score desc, id asc) order."""
    n = len(scores)
    if n == 0:
        return TopKResult.empty()
    if k < n:
        cut = scores[np.argpartition(scores, n - k)[n - k:]].min()
        # everything tied with the cut value must compete on id
        cand = np.flatnonzero(scores >= cut)
    else:
        cand = np.arange(n)
    order = np.lexsort((ids[cand], -scores[cand]))[:k]
    pick = cand[order]
    return TopKResult(np.asarray(ids[pick], dtype=np.int64), np.asarray(scores[pick], dtype=np.float32))


def reconstruct_embedding(cb: Codebook, item: int) -> np.ndarray:
    item = cb.check_item(item)
    return np.concatenate([cb.sub_embeddings[m, cb.assignments[item, m]] for m in range(cb.num_splits)])


def precompute_sub_scores(cb: Codebook, phi) -> np.ndarray:
    """Partial scores ``S[m, b] = psi_{m,b} . phi_m`` as a float32 ``(M, B)`` array."""
    phi = _as_phi(cb, phi)
    parts = phi.reshape(cb.num_splits, cb.subdim)
    return np.einsum("mbd,md->mb", cb.sub_embeddings, parts).astype(np.float32, copy=False)


def check_sub_scores(cb: Codebook, s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=np.float32)
    if s.shape != (cb.num_splits, cb.num_subids):
        raise InputError(f"sub-score matrix must be {(cb.num_splits, cb.num_subids)}, got {s.shape}")
    return s


def gather_sum(codes: np.ndarray, s: np.ndarray, items: np.ndarray | None = None) -> np.ndarray:
    """Per-item score as a split-by-split float32 sum of table lookups.

    The summation order is fixed (split 0 first) so the same item gets a
    bitwise-identical score whether scored alone, in a subset or in the full
    catalogue.
    """
    if items is None:
        acc = np.take(s[0], codes[0])
        for m in range(1, s.shape[0]):
            acc += np.take(s[m], codes[m])
        return acc
    acc = np.take(s[0], codes[0, items])
    for m in range(1, s.shape[0]):
        acc += np.take(s[m], codes[m, items])
    return acc


def dense_topk(cb: Codebook, phi, k: int, item_embeddings: np.ndarray | None = None) -> TopKResult:
    """Score every item as ``w_i . phi`` over reconstructed embeddings.

    Pass ``item_embeddings`` (from :meth:`Codebook.item_embeddings`) to keep
    reconstruction out of the scoring call.
    """
    phi = _as_phi(cb, phi)
    k = _check_k(k)
    w = cb.item_embeddings() if item_embeddings is None else item_embeddings
    if w.shape != (cb.num_items, cb.dim):
        raise InputError(f"item embeddings must be {(cb.num_items, cb.dim)}, got {w.shape}")
    scores = w @ phi
    return select_topk(np.arange(cb.num_items), scores, k)


def pqtopk(cb: Codebook, s: np.ndarray, k: int, subset: Sequence[int] | np.ndarray | None = None) -> TopKResult:
    """Top-``k`` by summed sub-scores over ``subset`` (all items when None).

    Repeated ids in ``subset`` are scored once.
    """
    s = check_sub_scores(cb, s)
    k = _check_k(k)
    if subset is None:
        return select_topk(np.arange(cb.num_items), gather_sum(cb.codes, s), k)
    items = np.asarray(subset, dtype=np.int64).ravel()
    if items.size == 0:
        return TopKResult.empty()
    if items.min() < 0 or items.max() >= cb.num_items:
        raise InputError(f"subset contains ids outside [0, {cb.num_items})")
    items = np.unique(items)
    return select_topk(items, gather_sum(cb.codes, s, items), k)
