import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from helpers import gram_eigen_singular_values
from sfplab import numkernel as nk
from sfplab.errors import DegenerateError, InputError, ShapeError


class TestMatmul:
    def test_identity(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(nk.matmul(np.eye(2), a), a)

    def test_zero_annihilates(self, rng):
        b = rng.normal(size=(3, 5))
        np.testing.assert_array_equal(nk.matmul(np.zeros((2, 3)), b), np.zeros((2, 5)))

    def test_hand_product(self):
        np.testing.assert_array_equal(nk.matmul([[1, 2], [3, 4]], [[5], [6]]), [[17.0], [39.0]])

    def test_shape_error_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
            nk.matmul(np.ones((2, 3)), np.ones((2, 2)))

    def test_associativity(self, rng):
        for _ in range(20):
            a, b, c = rng.normal(size=(3, 4)), rng.normal(size=(4, 5)), rng.normal(size=(5, 2))
            np.testing.assert_allclose(nk.matmul(nk.matmul(a, b), c), nk.matmul(a, nk.matmul(b, c)), rtol=0, atol=1e-9)


class TestMaskedSoftmax:
    def test_first_causal_row_is_one_hot(self):
        out = nk.masked_softmax(np.random.default_rng(0).normal(size=(5, 5)), nk.causal_mask(5))
        np.testing.assert_array_equal(out[0], [1.0, 0, 0, 0, 0])

    def test_uniform_scores_give_uniform_visible_weights(self):
        out = nk.masked_softmax(np.zeros((6, 6)), nk.causal_mask(6))
        for i in range(6):
            np.testing.assert_allclose(out[i, : i + 1], 1.0 / (i + 1), rtol=0, atol=1e-15)
            assert np.all(out[i, i + 1 :] == 0.0)

    def test_two_entry_row(self):
        out = nk.masked_softmax(np.array([[1.0, 2.0]]), np.zeros((1, 2)))
        np.testing.assert_allclose(out[0], [1 / (1 + math.e), math.e / (1 + math.e)], atol=1e-15)
        np.testing.assert_allclose(out[0], [0.26894, 0.73106], atol=5e-6)

    def test_fully_masked_row_raises(self):
        mask = np.zeros((2, 2))
        mask[1] = -np.inf
        with pytest.raises(DegenerateError):
            nk.masked_softmax(np.zeros((2, 2)), mask)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            nk.masked_softmax(np.zeros((2, 3)), np.zeros((3, 3)))

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (7, 7), elements=st.floats(-30, 30)))
    def test_rows_sum_to_one_and_masked_are_zero(self, scores):
        out = nk.masked_softmax(scores, nk.causal_mask(7))
        np.testing.assert_allclose(out.sum(axis=1), 1.0, rtol=0, atol=1e-12)
        assert np.all(out[np.triu_indices(7, k=1)] == 0.0)


class TestRmsNorm:
    def test_ones_row(self):
        np.testing.assert_allclose(nk.rms_norm(np.ones((1, 4)), np.ones(4)), 1.0, atol=1e-5)

    def test_zero_row(self):
        np.testing.assert_array_equal(nk.rms_norm(np.zeros((1, 3)), np.ones(3)), 0.0)

    def test_hand_value(self):
        out = nk.rms_norm(np.array([[3.0, 4.0]]), np.ones(2))
        np.testing.assert_allclose(out[0], np.array([3.0, 4.0]) / math.sqrt(12.5 + 1e-6), rtol=1e-15)
        np.testing.assert_allclose(out[0], [0.8485, 1.1314], atol=5e-5)

    def test_gain_shape_checked(self):
        with pytest.raises(ShapeError):
            nk.rms_norm(np.ones((2, 3)), np.ones(2))


class TestSingularValues:
    def test_identity(self):
        np.testing.assert_allclose(nk.singular_values(np.eye(3)), [1, 1, 1], atol=1e-15)

    def test_diagonal(self):
        np.testing.assert_allclose(nk.singular_values(np.diag([1.0, 3.0])), [3, 1], atol=1e-15)

    def test_permutation(self):
        np.testing.assert_allclose(nk.singular_values([[0.0, 1.0], [1.0, 0.0]]), [1, 1], atol=1e-15)

    def test_rectangular_length(self, rng):
        assert len(nk.singular_values(rng.normal(size=(3, 7)))) == 3
        assert len(nk.singular_values(rng.normal(size=(7, 3)))) == 3

    def test_non_finite_rejected(self):
        with pytest.raises(InputError):
            nk.singular_values([[1.0, np.nan]])

    def test_matches_gram_eigen_oracle(self):
        worst = 0.0
        for seed in range(100):
            x = np.random.default_rng(seed).normal(size=(8, 8))
            sv = nk.singular_values(x)
            ref = gram_eigen_singular_values(x)
            assert np.all(np.diff(sv) <= 0) and np.all(sv >= 0)
            worst = max(worst, float(np.max(np.abs(sv - ref) / ref)))
        assert worst < 1e-6

    def test_agrees_with_lapack(self, rng):
        x = rng.normal(size=(12, 64))
        np.testing.assert_allclose(nk.singular_values(x), np.linalg.svd(x, compute_uv=False), rtol=1e-12)


class TestSeededInit:
    def test_zeros(self):
        np.testing.assert_array_equal(nk.seeded_init((3, 2), 5, "zeros"), np.zeros((3, 2)))

    def test_deterministic(self):
        a = nk.seeded_init((4, 6), [1, 2], "xavier-uniform")
        b = nk.seeded_init((4, 6), [1, 2], "xavier-uniform")
        assert a.tobytes() == b.tobytes()

    def test_xavier_bound(self):
        bound = math.sqrt(6 / 8)
        assert abs(bound - 0.866) < 1e-3
        for seed in range(20):
            w = nk.seeded_init((4, 4), seed, "xavier-uniform")
            assert np.all(np.abs(w) <= bound)

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            nk.seeded_init((2, 2), 0, "he-normal")
