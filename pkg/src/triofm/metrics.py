"""Accuracy and cost measurements for computed eigenvector blocks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError, RateFitError
from .linalg import BlockVector, gram, small_gen_eig

DEGENERACY_RTOL = 1e-10


def _groups(values, tol):
    groups, cur = [], [0]
    for k in range(1, len(values)):
        if values[k] - values[cur[0]] <= tol:
            cur.append(k)
        else:
            groups.append(cur)
            cur = [k]
    if len(values):
        groups.append(cur)
    return [np.array(g) for g in groups]


@dataclass
class ReferenceEigen:
    """Exact eigenpairs of the test matrix, ascending.

    ``groups`` partitions the stored indices into runs of eigenvalues equal
    to within ``1e-10 ||A||``.  Only ``values``/``vectors`` for the wanted
    block (and any degenerate partners just past it) need to be stored.
    """

    values: np.ndarray
    vectors: np.ndarray
    norm: float | None = None
    groups: list = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.shape[1] != self.values.size:
            raise DimensionError("one eigenvector per eigenvalue is required")
        if np.any(np.diff(self.values) < 0):
            raise ValueError("reference eigenvalues must be ascending")
        if self.norm is None:
            self.norm = float(np.max(np.abs(self.values))) if self.values.size else 0.0
        if self.groups is None:
            self.groups = _groups(self.values, DEGENERACY_RTOL * self.norm)

    @classmethod
    def from_matrix(cls, a, k=None):
        """Dense reference for an operator or array (small problems only)."""
        dense = a.to_dense() if hasattr(a, "to_dense") else np.asarray(a)
        w, v = np.linalg.eigh(dense)
        norm = float(np.max(np.abs(w)))
        if k is not None:
            # keep any degenerate partners of the k-th eigenvalue
            tol = DEGENERACY_RTOL * norm
            while k < w.size and w[k] - w[k - 1] <= tol:
                k += 1
            w, v = w[:k], v[:, :k]
        return cls(w, v, norm)

    def targets(self, objective, p):
        """``U_p sqrt(-Lambda_p)`` for Obj1 or ``U_p`` for Obj2."""
        u = self.vectors[:, :p]
        if objective == "obj1":
            return u * np.sqrt(np.maximum(-self.values[:p], 0.0))
        return u.copy()


def _arr(x):
    x = x.data if isinstance(x, BlockVector) else np.asarray(x, dtype=np.float64)
    return x[:, None] if x.ndim == 1 else x


def e_vec(x, ref, objective="obj1", triangularized=True):
    """Relative distance ``||X - X*||_F / ||X*||_F`` to the nearest global minimizer.

    Columns are matched with a free sign; inside a degenerate eigenvalue
    group the columns are aligned by orthogonal Procrustes against the
    whole eigenspace.  Returns ``None`` for the non-triangularized
    baselines, which converge to a subspace only.
    """
    if not triangularized:
        return None
    x = _arr(x)
    p = x.shape[1]
    if p > ref.values.size:
        raise DimensionError(f"reference holds {ref.values.size} pairs, block has {p}")
    scale = (np.sqrt(np.maximum(-ref.values, 0.0)) if objective == "obj1"
             else np.ones_like(ref.values))
    num = 0.0
    for g in ref.groups:
        cols = g[g < p]
        if cols.size == 0:
            continue
        basis = ref.vectors[:, g] * scale[g]
        xg = x[:, cols]
        if g.size == 1:
            t = basis
            num += min(np.sum((xg - t) ** 2), np.sum((xg + t) ** 2))
            continue
        # Procrustes over the Stiefel set basis @ W, W^T W = I
        m = basis.T @ xg
        uu, _, vt = np.linalg.svd(m, full_matrices=False)
        t = basis @ (uu @ vt)
        num += np.sum((xg - t) ** 2)
    den = float(np.sum(scale[:p] ** 2))
    return math.sqrt(num / den)


def e_val(a, x, ref):
    """``|tr((X^T X)^-1 X^T A X) - sum(lambda_p)| / |sum(lambda_p)|``."""
    x = _arr(x)
    p = x.shape[1]
    s = gram(x, a.apply(x))
    w, _ = small_gen_eig(0.5 * (s + s.T), gram(x))
    target = float(np.sum(ref.values[:p]))
    return abs(float(np.sum(w)) - target) / abs(target)


def nnz_thresholded(x, threshold=1e-5):
    """Number of entries with magnitude above ``threshold``."""
    return int(np.count_nonzero(np.abs(_arr(x)) > threshold))


def _monotone_tail(err, lower, upper):
    best, cur = (0, 0), None
    for t, e in enumerate(err):
        ok = math.isfinite(e) and lower <= e <= upper
        if ok and cur is not None and e < err[t - 1]:
            cur = (cur[0], t + 1)
        elif ok:
            cur = (t, t + 1)
        else:
            cur = None
        if cur is not None:
            best = cur
    return best


def fit_rate(trace, column=0, window=None, tol=0.0, upper=1e-4, min_rows=20):
    """Per-iteration contraction factor of one column's error.

    Least-squares slope of ``log err`` against the iteration index,
    exponentiated.  By default the window is the trailing run where the
    error decreases monotonically inside ``[10 tol, upper]``; rows after the
    column locked are ignored.

    Parameters
    ----------
    trace : ConvergenceTrace or array_like
        A solver trace (uses ``err_norm``) or a plain error sequence.
    column : int
        Zero-based column index.
    window : (int, int), optional
        Explicit half-open range of rows to fit.

    Raises
    ------
    RateFitError
        If fewer than ``min_rows`` rows are usable.
    """
    if hasattr(trace, "rows"):
        err = trace.column("err_norm", column)
        it = trace.column("iteration").astype(float)
        locked = trace.column("locked", column)
        if locked.any():
            stop = int(np.argmax(locked))
            err, it = err[:stop], it[:stop]
    else:
        err = np.asarray(trace, dtype=np.float64)
        it = np.arange(err.size, dtype=float)
    if window is None:
        window = _monotone_tail(list(err), 10.0 * tol, upper)
    lo, hi = window
    if hi - lo < min_rows:
        raise RateFitError(f"only {hi - lo} rows in the fitting window, need {min_rows}")
    slope = np.polyfit(it[lo:hi], np.log(err[lo:hi]), 1)[0]
    return float(np.exp(slope))
