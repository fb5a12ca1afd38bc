"""Iteration engine for the triangularized and plain orthogonalization-free methods.

One iteration, for ``t = 1, 2, ...``:

1. obtain ``A X`` (a fresh product for fixed steps; with exact linesearch
   the product of the search direction is reused, ``AX <- AX + alpha AD``,
   so each unlocked column costs one operator product per iteration);
2. evaluate the direction field ``G`` and guard against divergence;
3. lock converged leading columns;
4. evaluate the Rayleigh-Ritz residual (first iteration and every
   ``residual_every`` iterations) and test the stopping rule;
5. build the search direction, choose stepsizes, update unlocked columns.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .acceleration import DEFAULT_MOMENTUM, AccelState, search_direction
from .directions import OBJECTIVES, DirectionKind, direction_from_product
from .exceptions import (ConfigError, DegeneratePolynomialError, DimensionError,
                         DivergenceError, SingularBlockError)
from .linalg import BlockVector, apply_operator, gram, matmul_small, small_gen_eig
from .linesearch import (CubicPoly, StepsizeStrategy, fixed_stepsize,
                         linesearch_coefficients, solve_cubic_select)

STOPPING_RULES = ("either", "residual", "direction-norm")
TRACE_COLUMNS = ("iteration", "col_index", "g_norm", "err_norm", "alpha",
                 "locked", "cum_col_access", "residual")
DIVERGENCE_FACTOR = 1e8


@dataclass
class SolverConfig:
    """Everything that determines a run besides the operator and start block.

    ``momentum_beta=None`` selects 0.9 for Obj1 and 0.95 for Obj2.
    ``seed`` is only consumed when the caller lets :func:`solve` draw the
    initial block.
    """

    objective: str = "obj1"
    triangularized: bool = True
    stepsize: StepsizeStrategy = field(default_factory=StepsizeStrategy)
    acceleration: str = "cg"
    momentum_beta: float | None = None
    cg_clamp: bool = True
    tolerance: float = 1e-8
    max_iterations: int = 10000
    locking: bool = True
    stopping: str = "either"
    residual_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"unknown objective {self.objective!r}")
        if not self.tolerance > 0:
            raise ConfigError(f"tolerance must be positive, got {self.tolerance}")
        if int(self.max_iterations) < 1:
            raise ConfigError("max_iterations must be at least 1")
        if self.stopping not in STOPPING_RULES:
            raise ConfigError(f"unknown stopping rule {self.stopping!r}")
        if self.residual_every < 1:
            raise ConfigError("residual_every must be at least 1")
        if self.locking and not self.triangularized:
            raise ConfigError("column locking requires the triangularized directions")
        if isinstance(self.stepsize, str):
            self.stepsize = StepsizeStrategy(kind=self.stepsize)
        AccelState(self.acceleration, self.beta)

    @property
    def beta(self):
        if self.momentum_beta is None:
            return DEFAULT_MOMENTUM[self.objective]
        return self.momentum_beta

    @property
    def kind(self):
        return DirectionKind(self.objective, self.triangularized)


@dataclass
class TraceRow:
    """Per-iteration record; vector fields have one entry per column."""

    iteration: int
    g_norm: np.ndarray
    err_norm: np.ndarray
    alpha: np.ndarray
    locked: np.ndarray
    cum_col_access: int
    residual: float = math.nan


class ConvergenceTrace:
    """Ordered list of :class:`TraceRow` with CSV export."""

    def __init__(self):
        self.rows: list[TraceRow] = []

    def append(self, row):
        if self.rows:
            if row.iteration <= self.rows[-1].iteration:
                raise ValueError("trace iterations must increase")
            if row.cum_col_access < self.rows[-1].cum_col_access:
                raise ValueError("column accesses cannot decrease")
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, k):
        return self.rows[k]

    def __iter__(self):
        return iter(self.rows)

    def column(self, name, col=None):
        """Stack one field over iterations (``col`` picks a column of vector fields)."""
        vals = [getattr(r, name) for r in self.rows]
        if col is not None:
            vals = [v[col] for v in vals]
        return np.asarray(vals)

    def to_csv(self, path_or_buf=None):
        """Write one line per (iteration, column); returns the text if no target."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.rows:
            for i in range(len(r.g_norm)):
                w.writerow([r.iteration, i + 1, _fmt(r.g_norm[i]), _fmt(r.err_norm[i]),
                            _fmt(r.alpha[i]), int(r.locked[i]), r.cum_col_access,
                            _fmt(r.residual)])
        text = buf.getvalue()
        if path_or_buf is None:
            return text
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path):
        trace = cls()
        grouped = {}
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                grouped.setdefault(int(rec["iteration"]), []).append(rec)
        for it in sorted(grouped):
            recs = sorted(grouped[it], key=lambda r: int(r["col_index"]))
            trace.append(TraceRow(
                iteration=it,
                g_norm=np.array([float(r["g_norm"]) for r in recs]),
                err_norm=np.array([float(r["err_norm"]) for r in recs]),
                alpha=np.array([float(r["alpha"]) for r in recs]),
                locked=np.array([bool(int(r["locked"])) for r in recs]),
                cum_col_access=int(recs[0]["cum_col_access"]),
                residual=float(recs[0]["residual"])))
        return trace


def _fmt(v):
    v = float(v)
    return "nan" if math.isnan(v) else format(v, ".17g")


@dataclass
class SolveResult:
    x: BlockVector
    ritz_values: np.ndarray
    iterations: int
    column_accesses: int
    converged: bool
    trace: ConvergenceTrace
    residual: float = math.nan
    stop_reason: str = ""


# ---------------------------------------------------------------------------
# building blocks


def _rr_from_product(x, ax):
    s = gram(x, ax)
    s = 0.5 * (s + s.T)
    w, q = small_gen_eig(s, gram(x))
    axq = matmul_small(ax, q)
    num = np.linalg.norm(axq - matmul_small(x, q) * w)
    den = np.linalg.norm(axq)
    return (num / den if den > 0 else math.inf), w, q


def rayleigh_ritz_residual(a, x):
    """Relative residual ``||AXQ - XQ L||_F / ||AXQ||_F`` of the Ritz pairs of ``X``.

    ``(Q, L)`` solve ``(X^T A X) Q = (X^T X) Q L`` with ``L`` ascending.

    Returns
    -------
    residual : float
    ritz_values : ndarray
    q : ndarray

    Raises
    ------
    SingularBlockError
        If ``X^T X`` is numerically singular.
    """
    x = x.data if isinstance(x, BlockVector) else np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    return _rr_from_product(x, a.apply(x))


def lock_measure(g_col, ax_col, objective):
    """``||g|| ||Ax||^(1/3)`` for Obj1 and ``||g|| ||Ax||`` for Obj2."""
    g = float(np.linalg.norm(g_col))
    ax = float(np.linalg.norm(ax_col))
    if objective == "obj1":
        return g * ax ** (1.0 / 3.0)
    return g * ax


def check_lock(i, g_col, ax_col, objective, tol, previous_locked=True):
    """Whether column ``i`` may be locked.

    The prefix rule requires every earlier column to be locked already
    (``previous_locked``); column 1 has no predecessor.
    """
    if i > 1 and not previous_locked:
        return False
    return lock_measure(g_col, ax_col, objective) < tol


def reference_rate(eigenvalues, alpha, i):
    """Predicted error contraction ``1 - alpha min_{j<=i} (lam_{j+1} - lam_j)`` for column ``i``."""
    lam = np.asarray(eigenvalues, dtype=np.float64)
    return 1.0 - alpha * float(np.min(np.diff(lam[: i + 1])))


@dataclass
class LinearErrorModel:
    """Linearized one-step update of the projected errors of column ``i``.

    With ``e[m] = u_m^T (x_i - sqrt(-lam_i) u_i)`` and ``c[m] = u_i^T (x_m - x_m*)``
    for earlier columns ``m < i``, the next error is
    ``factors * e + coupling * c`` (``coupling`` vanishes for ``m >= i``).
    """

    factors: np.ndarray
    coupling: np.ndarray
    column: int

    def step(self, e, c=None):
        out = self.factors * e
        if c is not None:
            out = out + self.coupling * c
        return out

    def locked_fixed_point(self, c):
        """Limit of the ``m < i`` components when earlier errors ``c`` stay frozen."""
        lead = slice(0, self.column - 1)
        return self.coupling[lead] * np.asarray(c)[lead] / (1.0 - self.factors[lead])


def error_propagation_model(spectrum, alpha, i):
    """Linear error map of fixed-step TriOFM on Obj1 near its stable fixed point.

    Parameters
    ----------
    spectrum : array_like
        Eigenvalues ``lam_1 <= lam_2 <= ...`` (the first ``i`` negative).
    alpha : float
    i : int
        Column index, 1-based.
    """
    lam = np.asarray(spectrum, dtype=np.float64)
    li = lam[i - 1]
    f = 1.0 - alpha * (lam - li)
    f[i - 1] = 1.0 + 2.0 * alpha * li
    f[: i - 1] = 1.0 + alpha * li
    c = np.zeros_like(lam)
    c[: i - 1] = -alpha * np.sqrt(lam[: i - 1] * li)
    return LinearErrorModel(f, c, i)


# ---------------------------------------------------------------------------
# driver


def _targets(reference, objective, p):
    if reference is None:
        return None
    u = np.asarray(reference.vectors)[:, :p]
    lam = np.asarray(reference.values)[:p]
    if objective == "obj1":
        return u * np.sqrt(np.maximum(-lam, 0.0))
    return u


def _column_errors(x, targets):
    if targets is None:
        return np.full(x.shape[1], math.nan)
    plus = np.linalg.norm(x - targets, axis=0)
    minus = np.linalg.norm(x + targets, axis=0)
    return np.minimum(plus, minus)


def _stepsizes(config, x, ax, d, ad, start, alpha_fixed):
    p = x.shape[1]
    alpha = np.zeros(p)
    kind = config.stepsize.kind
    if kind == "fixed":
        alpha[start:] = alpha_fixed
        return alpha
    tri = config.triangularized and config.stepsize.form == "direction"
    coef = linesearch_coefficients(x, ax, d, ad, config.objective, tri)
    if kind == "exact-full":
        try:
            alpha[start:] = solve_cubic_select(CubicPoly.from_array(coef[-1]))
        except DegeneratePolynomialError:
            pass
        return alpha
    for i in range(start, p):
        try:
            alpha[i] = solve_cubic_select(CubicPoly.from_array(coef[i]))
        except DegeneratePolynomialError:
            alpha[i] = 0.0
    return alpha


def solve(a, x0, config=None, reference=None, callback=None):
    """Run the configured iteration from ``x0``.

    Parameters
    ----------
    a : MatrixOperator
    x0 : BlockVector or ndarray
        Initial block; copied, never modified.
    config : SolverConfig, optional
    reference : object with ``values`` and ``vectors``, optional
        Exact eigenpairs; enables the per-column error column of the trace.
    callback : callable, optional
        ``callback(row, x)`` after each row is recorded, with ``x`` the
        iterate the row describes (before the update).

    Returns
    -------
    SolveResult

    Raises
    ------
    DivergenceError
        On non-finite values or when ``||X||_F`` leaves the ball of radius
        ``1e8 sqrt(rho p)``.
    """
    config = SolverConfig() if config is None else config
    if isinstance(x0, BlockVector):
        x = BlockVector(x0.data, x0.locked)
    else:
        x = BlockVector(x0)
    if a.n != x.n:
        raise DimensionError(f"operator has dimension {a.n}, block has n={x.n}")
    if not config.triangularized and x.n_locked:
        raise ConfigError("locked columns require the triangularized directions")
    p = x.p
    kind = config.kind
    exact = config.stepsize.kind != "fixed"
    rho = a.estimate_norm()
    alpha_fixed = None
    if not exact:
        alpha_fixed = fixed_stepsize(config.stepsize.alpha, rho)
    radius = DIVERGENCE_FACTOR * math.sqrt(max(rho, 1.0) * p)
    state = AccelState(config.acceleration, config.beta, config.cg_clamp,
                       block_beta=not config.triangularized)
    targets = _targets(reference, config.objective, p)
    tol = config.tolerance
    trace = ConvergenceTrace()
    ax = None
    residual = math.nan
    ritz = np.full(p, math.nan)
    converged = False
    stop_reason = "max_iterations"
    warned = False
    last_row = None

    for t in range(1, int(config.max_iterations) + 1):
        start = x.n_locked
        if ax is None:
            ax = apply_operator(a, x, skip_locked=False)
        elif not exact:
            fresh = apply_operator(a, x, skip_locked=True)
            ax[:, start:] = fresh[:, start:]
        g = direction_from_product(kind, x.data, ax)

        xnorm = float(np.linalg.norm(x.data))
        if not (np.isfinite(xnorm) and np.all(np.isfinite(g))) or xnorm > radius:
            raise DivergenceError(
                f"iterate diverged at iteration {t} (||X||_F = {xnorm:.3e})", last_row)

        if config.locking:
            k = start
            while k < p and check_lock(k + 1, g[:, k], ax[:, k], config.objective, tol):
                k += 1
            if k > start:
                x.lock_prefix(k)
                start = k

        check_rr = t == 1 or t % config.residual_every == 0
        if check_rr:
            try:
                residual, ritz, _ = _rr_from_product(x.data, ax)
            except SingularBlockError:
                residual = math.nan
            if config.objective == "obj2" and not warned and np.nanmax(ritz) > 0:
                warnings.warn("positive Ritz value: Obj2 is unbounded from below "
                              "for an indefinite matrix", RuntimeWarning, stacklevel=2)
                warned = True

        gnorm = np.linalg.norm(g, axis=0)
        stop = start == p
        if stop:
            stop_reason = "all_locked"
        elif check_rr and config.stopping in ("either", "residual") and residual < tol:
            stop, stop_reason = True, "residual"
        elif config.stopping == "direction-norm" and np.linalg.norm(gnorm[start:]) < tol:
            stop, stop_reason = True, "direction_norm"

        row = TraceRow(t, gnorm, _column_errors(x.data, targets), np.zeros(p),
                       x.locked.copy(), x.column_access_count,
                       residual if check_rr else math.nan)
        if stop:
            converged = True
            trace.append(row)
            if callback is not None:
                callback(row, x.data)
            break

        d = search_direction(g, state, start)
        ad = apply_operator(a, x, skip_locked=True, vectors=d) if exact else None
        row.alpha = _stepsizes(config, x.data, ax, d, ad, start, alpha_fixed)
        row.cum_col_access = x.column_access_count
        trace.append(row)
        last_row = row
        if callback is not None:
            callback(row, x.data)

        x.data[:, start:] += d[:, start:] * row.alpha[start:]
        if exact:
            ax[:, start:] += ad[:, start:] * row.alpha[start:]

    if not converged and not exact:
        # the last update left the cached product stale; refresh off the books
        ax = a.apply(x.data)
    try:
        residual, ritz, _ = _rr_from_product(x.data, ax)
    except SingularBlockError:
        pass
    return SolveResult(x=x, ritz_values=ritz, iterations=len(trace),
                       column_accesses=x.column_access_count, converged=converged,
                       trace=trace, residual=residual, stop_reason=stop_reason)
