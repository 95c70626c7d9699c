import numpy as np
import pytest

from app.core.errors import DimensionMismatchError
from app.utils.lowrank_utils import (
    LowRankFactor,
    lr_add,
    lr_from_dense,
    lr_frob_norm,
    lr_inner,
    lr_scale,
    lr_truncate,
    retained_rank,
    unvec,
    vec,
)
from tests.conftest import random_factor


def _complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestVec:
    def test_column_major(self):
        X = np.array([[1, 2], [3, 4]])
        np.testing.assert_array_equal(vec(X), [1, 3, 2, 4])
        np.testing.assert_array_equal(unvec(vec(X), 2, 2), X)

    def test_factor_vector_matches_dense(self, rng):
        X = random_factor(rng, 7, 4, 2)
        np.testing.assert_allclose(X.to_vector(), vec(X.U @ X.V.T))


class TestFromDense:
    def test_rank_one_input(self, rng):
        u, v = _complex(rng, 9), _complex(rng, 5)
        M = np.outer(u, v)
        X = lr_from_dense(M, 1e-6)
        assert X.rank == 1
        np.testing.assert_allclose(X.to_dense(), M, atol=1e-12 * np.linalg.norm(M))

    def test_identity_keeps_both_directions(self):
        assert lr_from_dense(np.eye(2), 1e-6).rank == 2

    def test_zero_tolerance_reproduces_input(self, rng):
        M = _complex(rng, 20, 15)
        X = lr_from_dense(M, 0.0)
        assert np.linalg.norm(X.to_dense() - M) <= 1e-12 * np.linalg.norm(M)

    def test_zero_matrix_has_rank_zero(self):
        X = lr_from_dense(np.zeros((4, 3)), 1e-6)
        assert X.rank == 0
        assert X.shape == (4, 3)

    def test_negative_tolerance_rejected(self):
        with pytest.raises(ValueError):
            lr_from_dense(np.eye(3), -1.0)


class TestTruncate:
    def test_rank_one_unchanged(self, rng):
        X = lr_from_dense(np.outer(_complex(rng, 6), _complex(rng, 4)), 0.0)
        Y = lr_truncate(X, 1e-6)
        assert Y.rank == 1
        np.testing.assert_allclose(Y.to_dense(), X.to_dense(), atol=1e-12)

    def test_drops_tiny_singular_value(self, rng):
        Qu, _ = np.linalg.qr(_complex(rng, 10, 2))
        Qv, _ = np.linalg.qr(_complex(rng, 8, 2))
        X = LowRankFactor(Qu * np.array([1.0, 1e-9]), Qv)
        Y = lr_truncate(X, 1e-6)
        assert Y.rank == 1
        assert np.linalg.norm(X.to_dense() - Y.to_dense()) <= 1e-6 * lr_frob_norm(X)

    def test_redundant_rank_three_sum(self, rng):
        X = random_factor(rng, 12, 9, 3)
        Y = lr_truncate(X, 0.0)
        assert Y.rank <= 3
        np.testing.assert_allclose(Y.to_dense(), X.to_dense(), atol=1e-12 * lr_frob_norm(X))

    def test_canonical_form(self, rng):
        Y = lr_truncate(random_factor(rng, 12, 9, 4), 1e-8)
        np.testing.assert_allclose(Y.V.conj().T @ Y.V, np.eye(Y.rank), atol=1e-12)
        gram = Y.U.conj().T @ Y.U
        np.testing.assert_allclose(gram - np.diag(np.diag(gram)), 0.0, atol=1e-10)

    def test_zero_tolerance_is_idempotent(self, rng):
        X = lr_add(random_factor(rng, 8, 6, 2), random_factor(rng, 8, 6, 3))
        once = lr_truncate(X, 0.0)
        twice = lr_truncate(once, 0.0)
        assert once.rank == twice.rank == 5
        np.testing.assert_allclose(twice.to_dense(), once.to_dense(), atol=1e-12 * lr_frob_norm(X))
        np.testing.assert_allclose(once.to_dense(), X.to_dense(), atol=1e-12 * lr_frob_norm(X))

    def test_zero_rank_passthrough(self):
        X = LowRankFactor.zeros(5, 3)
        assert lr_truncate(X, 1e-6) is X

    def test_randomized_error_and_minimal_rank(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            rows, cols = rng.integers(2, 25, size=2)
            stored = int(rng.integers(1, 8))
            decay = 10.0 ** (-rng.uniform(0, 4) * np.arange(stored))
            U = _complex(rng, rows, stored) * decay
            X = LowRankFactor(U, _complex(rng, cols, stored))
            eps = 10.0 ** rng.uniform(-8, -0.3)

            Y = lr_truncate(X, eps)
            dense = X.to_dense()
            norm = np.linalg.norm(dense)
            assert np.linalg.norm(dense - Y.to_dense()) <= eps * norm * (1 + 1e-8) + 1e-12 * norm

            s = np.linalg.svd(dense, compute_uv=False)
            assert Y.rank == retained_rank(s, eps)


class TestRetainedRank:
    def test_tail_rule(self):
        s = np.array([1.0, 0.1, 0.01])
        assert retained_rank(s, 0.5) == 1
        assert retained_rank(s, 0.05) == 2
        assert retained_rank(s, 0.0) == 3

    def test_all_zero(self):
        assert retained_rank(np.zeros(3), 0.1) == 0


class TestArithmetic:
    def test_add_zero(self, rng):
        X = random_factor(rng, 6, 5, 2)
        Y = lr_add(X, LowRankFactor.zeros(6, 5))
        assert Y.rank == 2
        np.testing.assert_array_equal(Y.to_dense(), X.to_dense())

    def test_add_identical(self, rng):
        X = random_factor(rng, 6, 5, 1)
        Y = lr_add(X, X)
        assert Y.rank == 2
        np.testing.assert_allclose(Y.to_dense(), 2 * X.to_dense())

    def test_add_random(self, rng):
        X, Y = random_factor(rng, 8, 7, 2), random_factor(rng, 8, 7, 3)
        Z = lr_add(X, Y)
        assert Z.rank == 5
        np.testing.assert_allclose(Z.to_dense(), X.to_dense() + Y.to_dense(), atol=1e-13 * lr_frob_norm(Z))

    def test_add_shape_mismatch(self, rng):
        with pytest.raises(DimensionMismatchError):
            lr_add(random_factor(rng, 6, 5, 1), random_factor(rng, 5, 5, 1))

    @pytest.mark.parametrize("s", [1.0, 0.0, 2 - 3j])
    def test_scale(self, rng, s):
        X = random_factor(rng, 6, 4, 2)
        np.testing.assert_allclose(lr_scale(X, s).to_dense(), s * X.to_dense(), atol=1e-14 * 10 * lr_frob_norm(X))

    def test_mismatched_factor_columns(self, rng):
        with pytest.raises(DimensionMismatchError):
            LowRankFactor(_complex(rng, 4, 2), _complex(rng, 3, 1))


class TestInnerProduct:
    def test_unit_rank_one(self, rng):
        u = _complex(rng, 5)
        v = _complex(rng, 3)
        X = LowRankFactor((u / np.linalg.norm(u))[:, None], (v / np.linalg.norm(v))[:, None])
        assert lr_inner(X, X) == pytest.approx(1.0)
        assert lr_frob_norm(X) == pytest.approx(1.0)

    def test_orthogonal_column_spaces(self):
        X = LowRankFactor(np.array([[1.0], [0.0]]), np.array([[1.0], [1.0]]))
        Y = LowRankFactor(np.array([[0.0], [1.0]]), np.array([[1.0], [2.0]]))
        assert abs(lr_inner(X, Y)) < 1e-15

    def test_matches_dense_vdot(self, rng):
        X, Y = random_factor(rng, 9, 6, 3), random_factor(rng, 9, 6, 3)
        expected = np.vdot(Y.to_vector(), X.to_vector())
        assert abs(lr_inner(X, Y) - expected) <= 1e-12 * abs(expected)

    def test_norm(self, rng):
        X = random_factor(rng, 9, 6, 4)
        assert lr_frob_norm(X) == pytest.approx(np.linalg.norm(X.to_dense()), rel=1e-12)
        assert lr_frob_norm(LowRankFactor.zeros(9, 6)) == 0.0

    def test_linear_in_first_argument(self, rng):
        X1, X2, Y = (random_factor(rng, 7, 5, 2) for _ in range(3))
        a, b = 1.5 - 2j, -0.25 + 0.75j
        combined = lr_add(lr_scale(X1, a), lr_scale(X2, b))
        expected = a * lr_inner(X1, Y) + b * lr_inner(X2, Y)
        assert lr_inner(combined, Y) == pytest.approx(expected, rel=1e-10)

    def test_conjugate_linear_in_second_argument(self, rng):
        X, Y = random_factor(rng, 7, 5, 2), random_factor(rng, 7, 5, 3)
        a = 0.5 + 3j
        assert lr_inner(X, lr_scale(Y, a)) == pytest.approx(np.conj(a) * lr_inner(X, Y), rel=1e-10)
        assert lr_inner(Y, X) == pytest.approx(np.conj(lr_inner(X, Y)), rel=1e-10)
