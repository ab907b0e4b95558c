import numpy as np
import pytest

from pqprune.core import Codebook


def brute_scores(cb, phi):
    """Item scores by explicit float64 loops over reconstructed embeddings."""
    phi = np.asarray(phi, dtype=np.float64)
    w = cb.subdim
    out = np.empty(cb.num_items)
    for i in range(cb.num_items):
        total = 0.0
        for m in range(cb.num_splits):
            psi = cb.sub_embeddings[m, cb.assignments[i, m]].astype(np.float64)
            total += float(psi @ phi[m * w:(m + 1) * w])
        out[i] = total
    return out


def brute_topk(scores, k, ids=None):
    ids = range(len(scores)) if ids is None else ids
    pairs = sorted({int(i): float(scores[int(i)]) for i in ids}.items(), key=lambda p: (-p[1], p[0]))
    return pairs[:k]


def random_codebook(rng, n, m, b, d, dyadic=False):
    """Random codebook; ``dyadic`` values are multiples of 1/4 in [-1, 1].

    Dyadic instances keep every dot product and partial sum exact in float32,
    so dense and sub-score paths agree bit for bit and ties are common.
    """
    assignments = rng.integers(0, b, (n, m))
    if dyadic:
        sub = rng.integers(-4, 5, (m, b, d // m)) / 4.0
    else:
        sub = rng.standard_normal((m, b, d // m))
    return Codebook(assignments, sub.astype(np.float32))


def random_phi(rng, d, dyadic=False):
    if dyadic:
        return (rng.integers(-4, 5, d) / 4.0).astype(np.float32)
    return rng.standard_normal(d).astype(np.float32)


@pytest.fixture
def fixture_cb():
    """Two splits, two sub-ids, four items covering every code."""
    sub = np.array(
        [
            [[1.0, 7.0], [0.5, -3.0]],
            [[5.0, 0.2], [-1.0, 2.0]],
        ],
        dtype=np.float32,
    )
    assignments = np.array([[0, 0], [0, 1], [1, 0], [1, 1]])
    return Codebook(assignments, sub)


@pytest.fixture
def fixture_phi():
    return np.array([1.0, 0.0, 0.0, 1.0], dtype=np.float32)
