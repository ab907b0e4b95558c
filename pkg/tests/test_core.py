import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_scores, brute_topk, random_codebook, random_phi
from pqprune.core import (
    Codebook,
    InputError,
    TopKResult,
    dense_topk,
    pqtopk,
    precompute_sub_scores,
    reconstruct_embedding,
    select_topk,
)


def check_topk_invariants(res: TopKResult, k: int, pool: int):
    assert len(res) == min(k, pool)
    assert len(set(res.ids.tolist())) == len(res)
    for (i1, s1), (i2, s2) in zip(res.entries, res.entries[1:]):
        assert s1 > s2 or (s1 == s2 and i1 < i2)


class TestCodebook:
    def test_shape_properties(self, fixture_cb):
        assert (fixture_cb.num_items, fixture_cb.num_splits, fixture_cb.num_subids) == (4, 2, 2)
        assert fixture_cb.dim == 4

    def test_rejects_out_of_range_assignment(self):
        with pytest.raises(InputError):
            Codebook(np.array([[0, 2]]), np.zeros((2, 2, 1), np.float32))

    def test_rejects_negative_assignment(self):
        with pytest.raises(InputError):
            Codebook(np.array([[0, -1]]), np.zeros((2, 2, 1), np.float32))

    def test_rejects_split_mismatch(self):
        with pytest.raises(InputError):
            Codebook(np.zeros((3, 2), int), np.zeros((3, 2, 1), np.float32))

    def test_tables_are_read_only(self, fixture_cb):
        with pytest.raises(ValueError):
            fixture_cb.assignments[0, 0] = 1


class TestReconstruct:
    def test_concatenates_sub_embeddings(self, fixture_cb):
        np.testing.assert_array_equal(reconstruct_embedding(fixture_cb, 1), [1.0, 7.0, -1.0, 2.0])

    def test_single_split_is_the_row(self):
        rng = np.random.default_rng(3)
        cb = random_codebook(rng, 5, 1, 4, 6)
        for i in range(5):
            np.testing.assert_array_equal(reconstruct_embedding(cb, i), cb.sub_embeddings[0, cb.assignments[i, 0]])

    def test_dot_matches_sum_of_sub_dots(self):
        rng = np.random.default_rng(11)
        cb = random_codebook(rng, 50, 4, 16, 32)
        phi = random_phi(rng, 32)
        w = cb.subdim
        for i in range(cb.num_items):
            lhs = float(reconstruct_embedding(cb, i).astype(np.float64) @ phi.astype(np.float64))
            rhs = sum(
                float(cb.sub_embeddings[m, cb.assignments[i, m]].astype(np.float64) @ phi[m * w:(m + 1) * w])
                for m in range(4)
            )
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    def test_out_of_range(self, fixture_cb):
        with pytest.raises(InputError):
            reconstruct_embedding(fixture_cb, 4)

    def test_full_matrix_matches_rows(self):
        rng = np.random.default_rng(5)
        cb = random_codebook(rng, 30, 4, 8, 16)
        w = cb.item_embeddings()
        for i in range(30):
            np.testing.assert_array_equal(w[i], reconstruct_embedding(cb, i))


class TestSubScores:
    def test_hand_example(self, fixture_cb, fixture_phi):
        s = precompute_sub_scores(fixture_cb, fixture_phi)
        np.testing.assert_allclose(s, [[1.0, 0.5], [0.2, 2.0]], rtol=1e-7)
        assert s.dtype == np.float32

    def test_zero_phi(self, fixture_cb):
        assert not precompute_sub_scores(fixture_cb, np.zeros(4)).any()

    def test_large_codebook_shape(self):
        cb = Codebook(np.zeros((3, 8), int), np.zeros((8, 256, 64), np.float32))
        s = precompute_sub_scores(cb, np.ones(512))
        assert s.shape == (8, 256) and s.size == 2048

    def test_dimension_mismatch(self, fixture_cb):
        with pytest.raises(InputError):
            precompute_sub_scores(fixture_cb, np.ones(5))

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), a=st.floats(-8, 8).filter(lambda x: x == 0 or abs(x) > 1e-3))
    def test_linear_in_phi(self, seed, a):
        rng = np.random.default_rng(seed)
        cb = random_codebook(rng, 4, 4, 8, 16)
        phi = random_phi(rng, 16)
        s1 = precompute_sub_scores(cb, phi).astype(np.float64)
        s2 = precompute_sub_scores(cb, np.float32(a) * phi).astype(np.float64)
        scale = np.abs(cb.sub_embeddings).max() * np.abs(a * phi).max() * cb.subdim
        np.testing.assert_allclose(s2, a * s1, rtol=1e-6, atol=1e-6 * scale)


class TestSelectTopK:
    def test_ties_resolved_by_id(self):
        ids = np.array([7, 3, 5, 1])
        scores = np.array([1.0, 2.0, 1.0, 1.0], np.float32)
        assert select_topk(ids, scores, 3).entries == [(3, 2.0), (1, 1.0), (5, 1.0)]

    @settings(max_examples=100, deadline=None)
    @given(
        scores=st.lists(st.integers(-3, 3), min_size=0, max_size=60),
        k=st.integers(1, 70),
    )
    def test_matches_sorted_oracle(self, scores, k):
        arr = np.array(scores, dtype=np.float32)
        res = select_topk(np.arange(len(arr)), arr, k)
        assert res.entries == brute_topk(arr, k)
        check_topk_invariants(res, k, len(arr))


class TestDenseAndPQ:
    def test_dense_fixture(self, fixture_cb, fixture_phi):
        res = dense_topk(fixture_cb, fixture_phi, 2)
        assert res.ids.tolist() == [1, 3]
        np.testing.assert_allclose(res.scores, [3.0, 2.5], rtol=1e-6)

    def test_pq_fixture_all_items(self, fixture_cb, fixture_phi):
        s = precompute_sub_scores(fixture_cb, fixture_phi)
        res = pqtopk(fixture_cb, s, 2, [0, 1, 2, 3])
        assert res.ids.tolist() == [1, 3]
        full = pqtopk(fixture_cb, s, 4)
        np.testing.assert_allclose(full.scores, [3.0, 2.5, 1.2, 0.7], rtol=1e-6)
        assert full.ids.tolist() == [1, 3, 0, 2]

    def test_pq_single_subset(self, fixture_cb, fixture_phi):
        s = precompute_sub_scores(fixture_cb, fixture_phi)
        res = pqtopk(fixture_cb, s, 2, [2])
        assert res.ids.tolist() == [2]
        assert res.scores[0] == pytest.approx(0.7, rel=1e-6)

    def test_pq_empty_subset(self, fixture_cb, fixture_phi):
        s = precompute_sub_scores(fixture_cb, fixture_phi)
        assert len(pqtopk(fixture_cb, s, 3, [])) == 0

    def test_pq_duplicates_scored_once(self, fixture_cb, fixture_phi):
        s = precompute_sub_scores(fixture_cb, fixture_phi)
        assert pqtopk(fixture_cb, s, 5, [3, 1, 3, 3]).ids.tolist() == [1, 3]

    def test_pq_invalid_id(self, fixture_cb, fixture_phi):
        s = precompute_sub_scores(fixture_cb, fixture_phi)
        with pytest.raises(InputError):
            pqtopk(fixture_cb, s, 2, [0, 4])

    def test_k_must_be_positive(self, fixture_cb, fixture_phi):
        with pytest.raises(InputError):
            dense_topk(fixture_cb, fixture_phi, 0)

    def test_k_beyond_catalogue(self, fixture_cb, fixture_phi):
        res = dense_topk(fixture_cb, fixture_phi, 50)
        assert res.ids.tolist() == [1, 3, 0, 2]

    def test_single_item(self):
        cb = Codebook(np.array([[1, 0]]), np.arange(8, dtype=np.float32).reshape(2, 2, 2))
        phi = np.array([1.0, -1.0, 0.5, 2.0], np.float32)
        res = dense_topk(cb, phi, 3)
        assert res.entries == [(0, pytest.approx(float(reconstruct_embedding(cb, 0) @ phi)))]

    @pytest.mark.parametrize("m,b,d", [(1, 4, 8), (2, 16, 8), (4, 16, 64), (8, 256, 64)])
    def test_exact_instances_agree_with_brute_force(self, m, b, d):
        rng = np.random.default_rng(m * 100 + b)
        cb = random_codebook(rng, 300, m, b, d, dyadic=True)
        phi = random_phi(rng, d, dyadic=True)
        oracle = brute_topk(brute_scores(cb, phi), 25)
        s = precompute_sub_scores(cb, phi)
        assert dense_topk(cb, phi, 25).entries == oracle
        assert pqtopk(cb, s, 25).entries == oracle

    def test_random_float_oracle_equivalence(self):
        rng = np.random.default_rng(2024)
        for _ in range(20):
            cb = random_codebook(rng, 500, 4, 16, 32)
            phi = random_phi(rng, 32)
            s = precompute_sub_scores(cb, phi)
            dense = dense_topk(cb, phi, 10)
            pq = pqtopk(cb, s, 10)
            assert dense.ids.tolist() == pq.ids.tolist()
            np.testing.assert_allclose(pq.scores, dense.scores, rtol=1e-5, atol=1e-5)
            check_topk_invariants(pq, 10, 500)

    def test_positive_scaling_keeps_order(self):
        rng = np.random.default_rng(8)
        cb = random_codebook(rng, 200, 2, 16, 8, dyadic=True)
        phi = random_phi(rng, 8, dyadic=True)
        base = dense_topk(cb, phi, 200).ids
        for a in (0.5, 2.0, 4.0):
            assert np.array_equal(dense_topk(cb, phi * np.float32(a), 200).ids, base)
