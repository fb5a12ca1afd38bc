import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from triofm.exceptions import DimensionError, EigenConvergenceError, SingularBlockError
from triofm.linalg import (BlockVector, MatrixOperator, apply_operator, gram, matmul_small,
                           random_orthogonal, random_unit_columns, small_gen_eig,
                           small_sym_eig, triu_small)


def _sym(rng, n):
    m = rng.standard_normal((n, n))
    return 0.5 * (m + m.T)


class TestMatrixOperator:
    def test_identity_diagonal(self):
        op = MatrixOperator.from_diagonal(np.ones(4))
        x = BlockVector(np.arange(12.0).reshape(4, 3))
        ax = apply_operator(op, x)
        np.testing.assert_array_equal(ax, x.data)
        assert x.column_access_count == 3

    def test_diag_action(self):
        op = MatrixOperator.from_diagonal([-2.0, -1.0])
        x = BlockVector(np.eye(2))
        np.testing.assert_array_equal(apply_operator(op, x), np.diag([-2.0, -1.0]))
        assert x.column_access_count == 2

    def test_sparse_matches_dense(self):
        rng = np.random.default_rng(4)
        s = sp.random(100, 100, density=0.05, random_state=4)
        s = s + s.T
        a_sp = MatrixOperator.from_sparse(s)
        a_de = MatrixOperator.from_dense(s.toarray())
        x = rng.standard_normal((100, 6))
        ys, yd = a_sp.apply(x), a_de.apply(x)
        np.testing.assert_allclose(ys, yd, rtol=1e-13, atol=1e-13 * np.abs(yd).max())

    def test_dimension_mismatch(self):
        op = MatrixOperator.from_diagonal(np.ones(3))
        with pytest.raises(DimensionError):
            apply_operator(op, BlockVector(np.ones((4, 2))))
        with pytest.raises(DimensionError):
            op.apply(np.ones(5))

    def test_symmetry_random_pairs(self):
        rng = np.random.default_rng(0)
        a = _sym(rng, 30)
        op = MatrixOperator.from_dense(a)
        na = np.linalg.norm(a, 2)
        for _ in range(100):
            u, v = rng.standard_normal(30), rng.standard_normal(30)
            gap = abs(u @ op.apply(v) - v @ op.apply(u))
            assert gap <= 1e-12 * na * np.linalg.norm(u) * np.linalg.norm(v)

    def test_linearity(self):
        rng = np.random.default_rng(1)
        op = MatrixOperator.from_dense(_sym(rng, 12))
        x, y = rng.standard_normal((12, 3)), rng.standard_normal((12, 3))
        np.testing.assert_allclose(op.apply(2.5 * x - 0.5 * y),
                                   2.5 * op.apply(x) - 0.5 * op.apply(y), atol=1e-13)

    def test_norm_estimate(self):
        op = MatrixOperator.from_dense(np.diag([-3.0, 1.0, 2.0]))
        assert op.estimate_norm() == pytest.approx(3.0, rel=1e-3)

    def test_procedural_to_dense(self):
        a = np.diag([1.0, 2.0, 3.0]) + np.eye(3, k=1) + np.eye(3, k=-1)
        op = MatrixOperator.procedural(3, lambda v: a @ v)
        np.testing.assert_allclose(op.to_dense(), a)


class TestBlockVector:
    def test_prefix_locking(self):
        with pytest.raises(ValueError):
            BlockVector(np.ones((3, 3)), locked=[False, True, False])
        x = BlockVector(np.ones((3, 3)))
        x.lock_prefix(2)
        np.testing.assert_array_equal(x.locked, [True, True, False])
        with pytest.raises(ValueError):
            x.lock_prefix(1)

    def test_skip_locked_counts(self):
        op = MatrixOperator.from_diagonal(np.arange(1.0, 6.0))
        x = BlockVector(np.ones((5, 4)), locked=[True, True, False, False])
        ax = apply_operator(op, x, skip_locked=True)
        assert x.column_access_count == 2
        np.testing.assert_array_equal(ax[:, :2], 0.0)
        np.testing.assert_array_equal(ax[:, 2], np.arange(1.0, 6.0))

    @given(st.integers(0, 5), st.integers(1, 3))
    def test_counter_monotone(self, k, reps):
        op = MatrixOperator.from_diagonal(np.ones(4))
        x = BlockVector(np.ones((4, 5)))
        x.lock_prefix(k)
        before = x.column_access_count
        for _ in range(reps):
            apply_operator(op, x, skip_locked=True)
        assert x.column_access_count - before == reps * (5 - k)


class TestKernels:
    def test_triu_examples(self):
        np.testing.assert_array_equal(triu_small(np.eye(2)), np.eye(2))
        np.testing.assert_array_equal(triu_small([[1, 2], [3, 4]]), [[1, 2], [0, 4]])

    def test_triu_partition(self):
        m = np.random.default_rng(2).standard_normal((5, 5))
        np.testing.assert_array_equal(triu_small(m) + np.tril(m, -1), m)
        np.testing.assert_array_equal(triu_small(triu_small(m)), triu_small(m))

    def test_gram_and_matmul(self):
        rng = np.random.default_rng(3)
        x, y = rng.standard_normal((20, 4)), rng.standard_normal((20, 3))
        np.testing.assert_allclose(gram(x, y), x.T @ y, atol=1e-13)
        np.testing.assert_allclose(gram(x), x.T @ x, atol=1e-13)
        m = rng.standard_normal((4, 4))
        np.testing.assert_allclose(matmul_small(x, m), x @ m, atol=1e-13)

    def test_column_stability(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((200, 7))
        m = np.triu(rng.standard_normal((7, 7)))
        full, lead = matmul_small(x, m), matmul_small(x[:, :4], m[:4, :4])
        np.testing.assert_array_equal(full[:, :4], lead)
        np.testing.assert_array_equal(gram(x)[:4, :4], gram(x[:, :4]))


class TestSmallEig:
    def test_diagonal(self):
        w, v = small_sym_eig(np.diag([3.0, 1.0, 2.0]))
        np.testing.assert_array_equal(w, [1.0, 2.0, 3.0])
        np.testing.assert_array_equal(np.abs(v), np.eye(3)[:, [1, 2, 0]])

    def test_swap(self):
        w, _ = small_sym_eig([[0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_allclose(w, [-1.0, 1.0], atol=1e-15)

    @pytest.mark.parametrize("p", [2, 3, 4])
    def test_charpoly_oracle(self, p):
        m = _sym(np.random.default_rng(p), p)
        roots = np.sort(np.roots(np.poly(m)).real)
        w, _ = small_sym_eig(m)
        np.testing.assert_allclose(w, roots, atol=1e-10)

    @pytest.mark.parametrize("p", [8, 20, 64])
    def test_residual(self, p):
        m = _sym(np.random.default_rng(p), p)
        w, v = small_sym_eig(m)
        nm = np.linalg.norm(m, 2)
        assert np.linalg.norm(m @ v - v * w) <= 1e-12 * nm * p
        np.testing.assert_allclose(v.T @ v, np.eye(p), atol=1e-12)
        assert np.all(np.diff(w) >= 0)

    def test_bound_and_sweeps(self):
        with pytest.raises(DimensionError):
            small_sym_eig(np.eye(65))
        with pytest.raises(EigenConvergenceError) as info:
            small_sym_eig(_sym(np.random.default_rng(0), 10), max_sweeps=1)
        assert info.value.sweeps == 1

    def test_gen_identity(self):
        w, q = small_gen_eig(np.diag([-2.0, -1.0]), np.eye(2))
        np.testing.assert_allclose(w, [-2.0, -1.0])
        np.testing.assert_allclose(np.abs(q), np.eye(2), atol=1e-15)

    def test_gen_proportional(self):
        rng = np.random.default_rng(8)
        g = rng.standard_normal((5, 5))
        b = g @ g.T + 5 * np.eye(5)
        w, _ = small_gen_eig(2.0 * b, b)
        np.testing.assert_allclose(w, 2.0, atol=1e-12)

    def test_gen_random_pair(self):
        rng = np.random.default_rng(9)
        s = _sym(rng, 6)
        g = rng.standard_normal((6, 6))
        b = g @ g.T + np.eye(6)
        w, q = small_gen_eig(s, b)
        assert np.linalg.norm(s @ q - b @ q * w) <= 1e-11 * np.linalg.norm(s, 2)
        np.testing.assert_allclose(q.T @ b @ q, np.eye(6), atol=1e-11)
        # Cholesky-reduction oracle through LAPACK
        import scipy.linalg
        np.testing.assert_allclose(w, scipy.linalg.eigh(s, b, eigvals_only=True), atol=1e-11)

    def test_gen_matches_standard(self):
        m = _sym(np.random.default_rng(10), 7)
        np.testing.assert_allclose(small_gen_eig(m, np.eye(7))[0], small_sym_eig(m)[0],
                                   atol=1e-11)

    def test_gen_singular(self):
        with pytest.raises(SingularBlockError):
            small_gen_eig(np.eye(2), np.array([[1.0, 1.0], [1.0, 1.0]]))


class TestRandom:
    def test_scalar(self):
        np.testing.assert_array_equal(random_orthogonal(1, 3), [[1.0]])

    def test_orthogonal(self):
        u = random_orthogonal(100, 0)
        assert np.linalg.norm(u.T @ u - np.eye(100)) <= 1e-12

    def test_deterministic(self):
        np.testing.assert_array_equal(random_orthogonal(30, 7), random_orthogonal(30, 7))

    def test_unit_columns(self):
        x = random_unit_columns(50, 4, 1)
        np.testing.assert_allclose(np.linalg.norm(x, axis=0), 1.0)
        assert x.flags.f_contiguous

    @settings(max_examples=20, deadline=None)
    @given(st.integers(1, 12), st.integers(0, 2**32 - 1))
    def test_orthogonal_property(self, n, seed):
        u = random_orthogonal(n, seed)
        np.testing.assert_allclose(u.T @ u, np.eye(n), atol=1e-12)
