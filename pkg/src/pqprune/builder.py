"""Codebooks from interaction matrices, and synthetic scoring workloads."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
from sklearn.utils.extmath import randomized_svd

from .core import Codebook, InputError

# below this many matrix cells a dense LAPACK SVD is cheap and exact
DENSE_SVD_CELLS = 4_000_000

HOT_SUBIDS = 3
PEAK_SCORE = 8.0


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """Binary user x item matrix in coordinate form, without duplicate pairs."""

    users: np.ndarray
    items: np.ndarray
    num_users: int
    num_items: int

    def __post_init__(self):
        if len(self.users) != len(self.items):
            raise InputError("users and items must have equal length")
        if len(self.users) and (
            self.users.min() < 0 or self.users.max() >= self.num_users
            or self.items.min() < 0 or self.items.max() >= self.num_items
        ):
            raise InputError("interaction coordinates out of range")

    @classmethod
    def from_pairs(cls, users, items, num_users: int, num_items: int) -> "InteractionMatrix":
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        key = np.unique(users * num_items + items)
        return cls(key // num_items, key % num_items, int(num_users), int(num_items))

    @classmethod
    def from_dense(cls, x) -> "InteractionMatrix":
        x = np.asarray(x)
        users, items = np.nonzero(x)
        return cls(users.astype(np.int64), items.astype(np.int64), x.shape[0], x.shape[1])

    def to_csr(self) -> sps.csr_matrix:
        data = np.ones(len(self.users), dtype=np.float64)
        x = sps.csr_matrix((data, (self.users, self.items)), shape=(self.num_users, self.num_items))
        x.sort_indices()
        return x


def synthetic_interactions(
    num_items: int,
    num_users: int,
    seed: int,
    clusters: int = 32,
    mean_per_item: float = 3.0,
    affinity: float = 0.8,
) -> InteractionMatrix:
    """Clustered random interactions; every item gets at least one user.

    Users and items are split into ``clusters`` groups and an interaction
    lands inside the item's own user group with probability ``affinity``.
    """
    if num_items < 1 or num_users < 1:
        raise InputError("need at least one item and one user")
    rng = np.random.default_rng(seed)
    c = max(1, min(clusters, num_users))
    item_cluster = rng.integers(0, c, num_items)
    per_item = 1 + rng.poisson(max(mean_per_item - 1.0, 0.0), num_items)
    items = np.repeat(np.arange(num_items), per_item)
    home = item_cluster[items]
    # users of group g are g, g + c, g + 2c, ...
    group_size = (num_users - home + c - 1) // c
    local = home + c * np.floor(rng.random(len(items)) * group_size).astype(np.int64)
    anywhere = rng.integers(0, num_users, len(items))
    users = np.where(rng.random(len(items)) < affinity, local, anywhere)
    return InteractionMatrix.from_pairs(users, items, num_users, num_items)


def item_latent_factors(x: InteractionMatrix, rank: int, seed: int) -> np.ndarray:
    """``(num_items, rank)`` item coordinates from a truncated SVD of ``x``.

    Items are projected onto the leading user singular vectors, so two items
    with identical interaction columns get bitwise-identical rows. Columns past
    the achievable rank are zero.
    """
    csr = x.to_csr()
    k = min(rank, csr.shape[0], csr.shape[1])
    if csr.shape[0] * csr.shape[1] <= DENSE_SVD_CELLS:
        u, _, _ = np.linalg.svd(csr.toarray(), full_matrices=False)
        u = u[:, :k]
    else:
        u, _, _ = randomized_svd(csr, n_components=k, random_state=seed)
    latent = np.zeros((x.num_items, rank), dtype=np.float64)
    latent[:, :k] = csr.T.tocsr() @ u
    return latent


def equal_frequency_buckets(values: np.ndarray, buckets: int) -> np.ndarray:
    """Bucket index by rank: bucket sizes differ by at most one.

    Equal values are ranked by position, so a run of ties may straddle a
    bucket boundary.
    """
    n = len(values)
    rank = np.empty(n, dtype=np.int64)
    rank[np.argsort(values, kind="stable")] = np.arange(n)
    return rank * buckets // n


def build_codebook_svd(x: InteractionMatrix, m: int, b: int, dim: int, seed: int) -> Codebook:
    """Sub-ids from per-split SVD quantiles; random normal sub-embeddings.

    Split ``j`` ranks items by their ``j``-th latent coordinate and cuts the
    ranking into ``b`` equal-frequency buckets. Sub-embeddings are drawn with
    unit expected norm since training them is outside this package.
    """
    if m < 1 or b < 1 or dim < 1:
        raise InputError("m, b and dim must be positive")
    if dim % m:
        raise InputError(f"dim {dim} is not divisible by {m} splits")
    latent = item_latent_factors(x, m, seed)
    assignments = np.empty((x.num_items, m), dtype=np.int64)
    for j in range(m):
        assignments[:, j] = equal_frequency_buckets(latent[:, j], b)
    rng = np.random.default_rng(seed)
    sub = rng.standard_normal((m, b, dim // m), dtype=np.float32)
    sub /= np.float32(np.sqrt(dim // m))
    return Codebook(assignments, sub)


@dataclass(frozen=True, eq=False)
class SyntheticWorkload:
    codebook: Codebook
    queries: np.ndarray
    seed: int
    skew: float
    num_users: int = 0

    def __post_init__(self):
        q = np.array(self.queries, dtype=np.float32, order="C")
        if q.ndim != 2 or q.shape[1] != self.codebook.dim:
            raise InputError(f"queries must be (n, {self.codebook.dim}), got {q.shape}")
        q.setflags(write=False)
        object.__setattr__(self, "queries", q)

    @property
    def num_queries(self) -> int:
        return self.queries.shape[0]


def skewed_queries(cb: Codebook, n: int, skew: float, rng: np.random.Generator) -> np.ndarray:
    """Sequence embeddings whose sub-score mass concentrates as ``skew`` -> 1.

    Each query mixes i.i.d. normal noise with weight ``1 - skew`` and, with
    weight ``skew``, a component in one random split that gives a few random
    sub-ids a sub-score of exactly ``PEAK_SCORE``.
    """
    if not 0.0 <= skew <= 1.0:
        raise InputError("skew must lie in [0, 1]")
    M, B, w = cb.num_splits, cb.num_subids, cb.subdim
    out = np.empty((n, cb.dim), dtype=np.float32)
    hot_n = min(HOT_SUBIDS, B)
    for q in range(n):
        noise = rng.standard_normal(cb.dim)
        split = rng.integers(M)
        hot = rng.choice(B, hot_n, replace=False)
        psi = cb.sub_embeddings[split, hot].astype(np.float64)
        # minimum-norm x with psi_b . x = PEAK_SCORE for every hot sub-id
        aligned = np.linalg.lstsq(psi, np.full(hot_n, PEAK_SCORE), rcond=None)[0]
        phi = (1.0 - skew) * noise
        phi[split * w:(split + 1) * w] += skew * aligned
        out[q] = phi
    return out


def gen_workload(
    num_items: int,
    num_users: int,
    m: int,
    b: int,
    dim: int,
    skew: float,
    seed: int,
    num_queries: int = 110,
) -> SyntheticWorkload:
    x = synthetic_interactions(num_items, num_users, seed)
    cb = build_codebook_svd(x, m, b, dim, seed)
    rng = np.random.default_rng([seed, 1])
    queries = skewed_queries(cb, num_queries, skew, rng)
    return SyntheticWorkload(cb, queries, seed, float(skew), num_users)
