"""Core linear algebra: operators, block vectors and small dense eigensolvers.

All block kernels in this module are *column stable*: column ``j`` of a
result is computed by exactly the same floating point operations no matter
how many other columns travel with it.  BLAS-3 ``gemm`` does not give that
guarantee (edge tiles and the gemv/gemm dispatch change rounding), and the
triangularized iterations rely on it for bitwise decoupling of leading
columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .exceptions import DimensionError, EigenConvergenceError, SingularBlockError

SMALL_EIG_BOUND = 64
_EPS = np.finfo(np.float64).eps


class MatrixOperator:
    """A symmetric linear map ``x -> A x`` on R^n.

    Parameters
    ----------
    n : int
        Dimension of the operator.
    matvec : callable
        Function mapping a length-``n`` vector to ``A @ x``.
    kind : {'dense', 'sparse', 'diagonal', 'procedural'}
    norm_estimate : float, optional
        Known or estimated ``||A||_2``.  Filled lazily by
        :meth:`estimate_norm` when absent.
    matrix : ndarray or sparse matrix, optional
        Backing storage, used by :meth:`to_dense` and Matrix Market export.
    """

    def __init__(self, n, matvec, kind="procedural", norm_estimate=None,
                 matrix=None):
        if n < 1:
            raise DimensionError(f"operator dimension must be positive, got {n}")
        self.n = int(n)
        self.kind = kind
        self.norm_estimate = norm_estimate
        self.matrix = matrix
        self._matvec = matvec

    @classmethod
    def from_dense(cls, a, norm_estimate=None):
        a = np.array(a, dtype=np.float64, order="C")
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"dense operator must be square, got {a.shape}")
        return cls(a.shape[0], a.dot, "dense", norm_estimate, a)

    @classmethod
    def from_sparse(cls, a, norm_estimate=None):
        a = sp.csr_matrix(a, dtype=np.float64)
        if a.shape[0] != a.shape[1]:
            raise DimensionError(f"sparse operator must be square, got {a.shape}")
        a.sort_indices()
        return cls(a.shape[0], a.dot, "sparse", norm_estimate, a)

    @classmethod
    def from_diagonal(cls, d):
        d = np.array(d, dtype=np.float64)
        return cls(d.size, lambda x: d * x, "diagonal",
                   float(np.max(np.abs(d))) if d.size else 0.0, d)

    @classmethod
    def procedural(cls, n, matvec, norm_estimate=None):
        return cls(n, matvec, "procedural", norm_estimate)

    def apply(self, x):
        """Return ``A @ x`` for a vector or an ``n x k`` block (column by column)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.n:
            raise DimensionError(
                f"operator has dimension {self.n}, block has {x.shape[0]} rows")
        if x.ndim == 1:
            return np.asarray(self._matvec(x), dtype=np.float64).reshape(self.n)
        out = np.empty(x.shape, order="F")
        for j in range(x.shape[1]):
            out[:, j] = self._matvec(np.ascontiguousarray(x[:, j]))
        return out

    def to_dense(self):
        if self.kind == "dense":
            return self.matrix.copy()
        if self.kind == "sparse":
            return self.matrix.toarray()
        if self.kind == "diagonal":
            return np.diag(self.matrix)
        return self.apply(np.eye(self.n, order="F"))

    def estimate_norm(self, iterations=30, seed=0):
        """Power-iteration estimate of ``||A||_2``; cached on the operator."""
        if self.norm_estimate is None:
            self.norm_estimate = power_norm_estimate(self, iterations, seed)
        return self.norm_estimate

    def __repr__(self):
        return f"MatrixOperator(n={self.n}, kind={self.kind!r})"


def power_norm_estimate(op, iterations=30, seed=0):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iterations):
        w = op.apply(v)
        est = np.linalg.norm(w)
        if est == 0.0:
            return 0.0
        v = w / est
    return float(est)


@dataclass
class BlockVector:
    """An ``n x p`` block of columns with a prefix-locking mask.

    The data array is kept in Fortran order so every column is contiguous.
    ``column_access_count`` counts column products with the operator.
    """

    data: np.ndarray
    locked: np.ndarray = None
    column_access_count: int = 0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[:, None]
        self.data = np.array(data, order="F", copy=True)
        if self.locked is None:
            self.locked = np.zeros(self.p, dtype=bool)
        else:
            self.locked = np.array(self.locked, dtype=bool)
            _check_prefix(self.locked)

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def p(self):
        return self.data.shape[1]

    @property
    def n_locked(self):
        return int(np.count_nonzero(self.locked))

    def lock_prefix(self, k):
        """Lock columns ``0..k-1``.  Locking never goes backwards."""
        if k < self.n_locked:
            raise ValueError("locked prefix cannot shrink")
        self.locked[:k] = True

    def copy(self):
        return BlockVector(self.data, self.locked, self.column_access_count)


def _check_prefix(locked):
    k = int(np.count_nonzero(locked))
    if not locked[:k].all():
        raise ValueError("locked flags must form a prefix")


def apply_operator(op, x, skip_locked=False, vectors=None):
    """Multiply the operator onto the columns of a block vector.

    Parameters
    ----------
    op : MatrixOperator
    x : BlockVector
        Owner of the locking mask and the access counter.
    skip_locked : bool
        Leave locked columns out; their output columns are zero.
    vectors : ndarray, optional
        Columns to multiply instead of ``x.data`` (same shape).  Used for
        search directions, which are charged to the iterate's counter.

    Returns
    -------
    ndarray
        ``n x p`` array, Fortran ordered.
    """
    if op.n != x.n:
        raise DimensionError(f"operator has dimension {op.n}, block has n={x.n}")
    src = x.data if vectors is None else vectors
    if src.shape != x.data.shape:
        raise DimensionError(f"vectors shape {src.shape} != block shape {x.data.shape}")
    start = x.n_locked if skip_locked else 0
    out = np.zeros(src.shape, order="F")
    if start < x.p:
        out[:, start:] = op.apply(src[:, start:])
    x.column_access_count += x.p - start
    return out


def gram(x, y=None):
    """Column-stable ``x.T @ y`` built from individual dot products."""
    sym = y is None
    if sym:
        y = x
    p, q = x.shape[1], y.shape[1]
    out = np.empty((p, q))
    xc = [np.ascontiguousarray(x[:, i]) for i in range(p)]
    yc = xc if sym else [np.ascontiguousarray(y[:, j]) for j in range(q)]
    for i in range(p):
        for j in range(i if sym else 0, q):
            out[i, j] = np.dot(xc[i], yc[j])
            if sym:
                out[j, i] = out[i, j]
    return out


def matmul_small(x, m):
    """Column-stable ``x @ m`` for an ``n x p`` block and a ``p x q`` matrix.

    Column ``j`` accumulates ``x[:, k] * m[k, j]`` for increasing ``k`` and
    skips exact zeros, so ``x @ triu(S)`` touches only leading columns.
    """
    out = np.zeros((x.shape[0], m.shape[1]), order="F")
    for j in range(m.shape[1]):
        col = out[:, j]
        for k in range(m.shape[0]):
            c = m[k, j]
            if c != 0.0:
                col += c * x[:, k]
    return out


def triu_small(m):
    """Upper triangular part of a square matrix, diagonal included."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"triu_small expects a square matrix, got {m.shape}")
    return np.triu(m)


def small_sym_eig(m, max_sweeps=50, bound=SMALL_EIG_BOUND):
    """Eigen-decomposition of a small symmetric matrix by cyclic Jacobi.

    Returns
    -------
    w : ndarray
        Eigenvalues in ascending order.
    v : ndarray
        Orthonormal eigenvectors as columns, ``m @ v = v @ diag(w)``.
    """
    a = np.array(m, dtype=np.float64, copy=True)
    p = a.shape[0]
    if a.ndim != 2 or a.shape[1] != p:
        raise DimensionError(f"expected a square matrix, got {a.shape}")
    if p > bound:
        raise DimensionError(f"small_sym_eig limited to p <= {bound}, got {p}")
    a = 0.5 * (a + a.T)
    v = np.eye(p)
    for sweep in range(1, max_sweeps + 1):
        rotated = False
        for i in range(p - 1):
            for j in range(i + 1, p):
                aij = a[i, j]
                if aij == 0.0 or abs(aij) <= _EPS * np.sqrt(abs(a[i, i] * a[j, j])):
                    a[i, j] = a[j, i] = 0.0
                    continue
                rotated = True
                tau = (a[j, j] - a[i, i]) / (2.0 * aij)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                ai = a[:, i].copy()
                aj = a[:, j]
                a[:, i] = c * ai - s * aj
                a[:, j] = s * ai + c * aj
                ai = a[i, :].copy()
                aj = a[j, :]
                a[i, :] = c * ai - s * aj
                a[j, :] = s * ai + c * aj
                a[i, j] = a[j, i] = 0.0
                vi = v[:, i].copy()
                vj = v[:, j]
                v[:, i] = c * vi - s * vj
                v[:, j] = s * vi + c * vj
        if not rotated:
            break
    else:
        raise EigenConvergenceError(
            f"Jacobi sweep did not converge in {max_sweeps} sweeps", max_sweeps)
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def small_gen_eig(s, b):
    """Solve ``s q = b q lambda`` for symmetric ``s`` and SPD ``b``.

    Cholesky reduction ``b = L L^T`` followed by Jacobi on
    ``L^-1 s L^-T``.  The eigenvectors are ``b``-orthonormal.

    Raises
    ------
    SingularBlockError
        If ``b`` is not numerically positive definite.
    """
    s = np.asarray(s, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    bw, _ = small_sym_eig(b)
    bnorm = max(abs(bw[0]), abs(bw[-1]))
    if bnorm == 0.0 or bw[0] <= 1e-14 * bnorm:
        raise SingularBlockError(
            f"Gram matrix is numerically singular (min eig {bw[0]:.3e}, norm {bnorm:.3e})")
    try:
        l = np.linalg.cholesky(0.5 * (b + b.T))
    except np.linalg.LinAlgError as exc:
        raise SingularBlockError("Cholesky factorization failed") from exc
    c = scipy.linalg.solve_triangular(l, s, lower=True)
    c = scipy.linalg.solve_triangular(l, c.T, lower=True)
    w, v = small_sym_eig(0.5 * (c + c.T))
    q = scipy.linalg.solve_triangular(l.T, v, lower=False)
    return w, q


def random_orthogonal(n, seed):
    """Haar-distributed orthogonal matrix from QR of a Gaussian matrix.

    Uses ``numpy.random.default_rng(seed)`` (PCG64).  The columns are
    sign-fixed so that ``R`` has a positive diagonal.
    """
    if n < 1:
        raise DimensionError("n must be >= 1")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def random_unit_columns(n, p, seed):
    """Independent Gaussian columns normalized to unit length."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    x /= np.linalg.norm(x, axis=0)
    return np.asfortranarray(x)
