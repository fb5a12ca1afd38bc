"""Stepsize selection: fixed steps and exact (cubic-root) linesearch.

Along a line ``X + alpha V`` both objectives are quartic in ``alpha``, so
the stationarity condition ``tr(V^T d(X + alpha V)) = 0`` is a cubic.  For
the triangularized directions the same holds with ``triu`` applied to the
Gram matrices, and restricting to the leading ``i`` columns gives one cubic
per column.  All leading-block coefficients come out of one pass over the
``p x p`` Gram matrices via cumulative sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DegeneratePolynomialError
from .linalg import gram

DOUBLE_ROOT_RTOL = 1e-8
LEADING_COEF_RTOL = 1e-14

STEPSIZE_KINDS = ("fixed", "exact-full", "exact-columnwise")
ROOT_FORMS = ("direction", "gradient")


@dataclass(frozen=True)
class CubicPoly:
    """``c3 a^3 + c2 a^2 + c1 a + c0``."""

    c3: float
    c2: float
    c1: float
    c0: float

    @classmethod
    def from_array(cls, c):
        return cls(*(float(v) for v in c))

    @property
    def coefficients(self):
        return (self.c3, self.c2, self.c1, self.c0)

    @property
    def scale(self):
        return abs(self.c3) + abs(self.c2) + abs(self.c1) + abs(self.c0)

    def __call__(self, a):
        return ((self.c3 * a + self.c2) * a + self.c1) * a + self.c0

    def derivative(self, a):
        return (3.0 * self.c3 * a + 2.0 * self.c2) * a + self.c1

    def quartic(self, a):
        """Antiderivative vanishing at zero: the objective change along the line."""
        return (((self.c3 / 4.0 * a + self.c2 / 3.0) * a + self.c1 / 2.0) * a + self.c0) * a

    def is_zero(self):
        return self.c3 == 0.0 and self.c2 == 0.0 and self.c1 == 0.0 and self.c0 == 0.0


@dataclass(frozen=True)
class StepsizeStrategy:
    kind: str = "exact-columnwise"
    alpha: float | None = None
    form: str = "direction"

    def __post_init__(self):
        if self.kind not in STEPSIZE_KINDS:
            raise ConfigError(f"unknown stepsize kind {self.kind!r}")
        if self.form not in ROOT_FORMS:
            raise ConfigError(f"unknown root equation form {self.form!r}")
        if self.kind == "fixed" and self.alpha is not None and not self.alpha > 0:
            raise ConfigError(f"fixed stepsize must be positive, got {self.alpha}")


def fixed_stepsize(alpha=None, rho=None):
    """Configured stepsize, or ``1 / (8 rho)`` in auto mode (``alpha=None``)."""
    if alpha is None:
        if rho is None or not rho > 0:
            raise ConfigError("auto stepsize needs a positive norm estimate rho")
        return 1.0 / (8.0 * rho)
    if not alpha > 0:
        raise ConfigError(f"stepsize must be positive, got {alpha}")
    return float(alpha)


# ---------------------------------------------------------------------------
# cubic roots


def _newton(poly, r):
    d = poly.derivative(r)
    if d != 0.0 and math.isfinite(d):
        step = poly(r) / d
        if math.isfinite(step):
            return r - step
    return r


def _cardano_roots(c3, c2, c1, c0):
    b, c, d = c2 / c3, c1 / c3, c0 / c3
    shift = b / 3.0
    p = c - b * shift
    q = (2.0 * b * b * b / 27.0) - (b * c / 3.0) + d
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc > 0.0:
        sq = math.sqrt(disc)
        u = -q / 2.0 - math.copysign(sq, q)
        u = math.copysign(abs(u) ** (1.0 / 3.0), u)
        t = u - p / (3.0 * u) if u != 0.0 else 0.0
        return [t - shift]
    if p == 0.0:
        return [-shift] * 3
    m = 2.0 * math.sqrt(-p / 3.0)
    arg = 3.0 * q / (p * m)
    theta = math.acos(max(-1.0, min(1.0, arg))) / 3.0
    return [m * math.cos(theta - 2.0 * math.pi * k / 3.0) - shift for k in range(3)]


def _companion_roots(c3, c2, c1, c0):
    roots = np.roots([c3, c2, c1, c0])
    return [float(r.real) for r in roots
            if abs(r.imag) <= DOUBLE_ROOT_RTOL * (1.0 + abs(r.real))]


def _backward_error(poly, roots):
    worst = 0.0
    for r in roots:
        if not math.isfinite(r):
            return math.inf
        try:
            scale = sum(abs(c) * abs(r) ** (3 - k) for k, c in enumerate(poly.coefficients))
        except OverflowError:
            return math.inf
        if scale > 0.0:
            worst = max(worst, abs(poly(r)) / scale)
    return worst


def cubic_real_roots(poly):
    """All real roots of a genuine cubic (``c3 != 0``), ascending, Newton polished.

    The closed form is tried first; the companion-matrix eigenvalues take
    over when it overflows or leaves a large backward error (extreme
    coefficient ratios).
    """
    c3, c2, c1, c0 = poly.coefficients
    with np.errstate(all="ignore"):
        try:
            roots = [_newton(poly, r) for r in _cardano_roots(c3, c2, c1, c0)]
        except (OverflowError, ValueError, ZeroDivisionError):
            roots = []
        err = _backward_error(poly, roots) if roots else math.inf
        if err > 1e-12:
            alt = [_newton(poly, r) for r in _companion_roots(c3, c2, c1, c0)]
            if alt and _backward_error(poly, alt) < err:
                roots = alt
    return sorted(roots)


def _close(a, b):
    return abs(a - b) <= DOUBLE_ROOT_RTOL * (1.0 + max(abs(a), abs(b)))


def _select_three(poly, r0, r1, r2):
    lo, hi = r1 - r0, r2 - r1
    if not _close(lo, hi) or abs(lo - hi) > DOUBLE_ROOT_RTOL * (1.0 + abs(r0) + abs(r2)):
        return r0 if lo > hi else r2
    q0, q2 = poly.quartic(r0), poly.quartic(r2)
    qscale = max(
        sum(abs(c) * abs(r) ** (4 - k) for k, c in enumerate(poly.coefficients))
        for r in (r0, r2))
    if abs(q0 - q2) > 1e-10 * qscale:
        return r0 if q0 < q2 else r2
    return r2


def _select_low_degree(c2, c1, c0):
    if c2 != 0.0:
        disc = c1 * c1 - 4.0 * c2 * c0
        if disc < 0.0:
            return -c1 / (2.0 * c2)
        sq = math.sqrt(disc)
        # root where the derivative 2 c2 a + c1 = +sqrt(disc) > 0 (a local minimum)
        if c1 <= 0.0:
            return (-c1 + sq) / (2.0 * c2)
        return (2.0 * c0) / (-c1 - sq)
    if c1 != 0.0:
        return -c0 / c1
    raise DegeneratePolynomialError("linesearch polynomial has no root (constant)")


def solve_cubic_select(poly):
    """Root of the stationarity cubic giving the exact linesearch step.

    Rules: a single real root is returned as is; with a double root the
    simple root wins; with three distinct roots the one farther from the
    middle root wins.  Equidistant outer roots are separated by the
    restricted quartic (lower value wins), then by the larger step.

    Raises
    ------
    DegeneratePolynomialError
        If ``c3``, ``c2`` and ``c1`` all vanish.
    """
    c3, c2, c1, c0 = poly.coefficients
    if not all(math.isfinite(c) for c in poly.coefficients):
        raise DegeneratePolynomialError(f"non-finite linesearch coefficients {poly}")
    if c3 == 0.0 and c2 == 0.0 and c1 == 0.0:
        raise DegeneratePolynomialError("linesearch polynomial is constant")
    if abs(c3) <= LEADING_COEF_RTOL * max(abs(c2), abs(c1), abs(c0)):
        return _select_low_degree(c2, c1, c0)
    roots = cubic_real_roots(poly)
    if len(roots) == 1:
        return roots[0]
    r0, r1, r2 = roots if len(roots) == 3 else (roots[0], roots[0], roots[-1])
    d01, d12 = _close(r0, r1), _close(r1, r2)
    if d01 and d12:
        return r1
    if d01:
        return r2
    if d12:
        return r0
    return _select_three(poly, r0, r1, r2)


# ---------------------------------------------------------------------------
# polynomial coefficients


def _ctrace(m, n, triangular):
    """``tr(M_i op(N_i))`` for every leading block ``i`` (``op`` = triu or identity)."""
    f = m * n.T
    if triangular:
        f = np.tril(f)
    return np.diagonal(np.cumsum(np.cumsum(f, axis=0), axis=1)).copy()


def linesearch_coefficients(x, ax, v, av, objective, triangular):
    """Cubic coefficients of ``tr(V_i^T d(X_i + a V_i))`` for all leading blocks.

    ``d`` is ``A Y + Y op(Y^T Y)`` for Obj1 and
    ``2 A Y - A Y op(Y^T Y) - Y op(Y^T A Y)`` for Obj2, where ``op`` is
    ``triu`` when ``triangular`` else the identity (gradient up to its
    constant factor).

    Returns
    -------
    ndarray, shape (p, 4)
        Row ``i-1`` holds ``(c3, c2, c1, c0)`` for the leading ``i`` columns;
        the last row is the full-block polynomial.
    """
    t = triangular
    xx = gram(x)
    xv = gram(x, v)
    vx = xv.T
    vv = gram(v)
    vax = gram(v, ax)
    vav = gram(v, av)
    c = np.empty((x.shape[1], 4))
    if objective == "obj1":
        c[:, 0] = _ctrace(vv, vv, t)
        c[:, 1] = _ctrace(vv, xv, t) + _ctrace(vv, vx, t) + _ctrace(vx, vv, t)
        c[:, 2] = (np.cumsum(np.diag(vav)) + _ctrace(vx, vx, t)
                   + _ctrace(vx, xv, t) + _ctrace(vv, xx, t))
        c[:, 3] = np.cumsum(np.diag(vax)) + _ctrace(vx, xx, t)
        return c
    if objective != "obj2":
        raise ConfigError(f"unknown objective {objective!r}")
    xax = gram(x, ax)
    xav = gram(x, av)
    s1 = xv + vx
    t1 = xav + vax
    c[:, 0] = -_ctrace(vav, vv, t) - _ctrace(vv, vav, t)
    c[:, 1] = (-_ctrace(vax, vv, t) - _ctrace(vav, s1, t)
               - _ctrace(vx, vav, t) - _ctrace(vv, t1, t))
    c[:, 2] = (2.0 * np.cumsum(np.diag(vav)) - _ctrace(vax, s1, t) - _ctrace(vav, xx, t)
               - _ctrace(vx, t1, t) - _ctrace(vv, xax, t))
    c[:, 3] = 2.0 * np.cumsum(np.diag(vax)) - _ctrace(vax, xx, t) - _ctrace(vx, xax, t)
    return c


def _blocks(a, x, v):
    x = np.asfortranarray(np.atleast_2d(np.asarray(x, dtype=np.float64).T).T)
    v = np.asfortranarray(np.atleast_2d(np.asarray(v, dtype=np.float64).T).T)
    return x, a.apply(x), v, a.apply(v)


def full_linesearch_poly_obj1(a, x, v):
    """Gradient-form cubic ``tr(V^T grad f1(X + a V)) / 4``."""
    return CubicPoly.from_array(linesearch_coefficients(*_blocks(a, x, v), "obj1", False)[-1])


def full_linesearch_poly_obj2(a, x, v):
    """Gradient-form cubic ``tr(V^T grad f2(X + a V)) / 2``."""
    return CubicPoly.from_array(linesearch_coefficients(*_blocks(a, x, v), "obj2", False)[-1])


def columnwise_linesearch_obj1(a, x, v, i):
    """Cubic for the step of column ``i`` (1-based): ``tr(V_i^T g1(X_i + a V_i))``."""
    x, ax, v, av = _blocks(a, x[:, :i], v[:, :i])
    return CubicPoly.from_array(linesearch_coefficients(x, ax, v, av, "obj1", True)[-1])


def columnwise_linesearch_obj2(a, x, v, i):
    """Cubic for the step of column ``i`` (1-based): ``tr(V_i^T g2(X_i + a V_i))``."""
    x, ax, v, av = _blocks(a, x[:, :i], v[:, :i])
    return CubicPoly.from_array(linesearch_coefficients(x, ax, v, av, "obj2", True)[-1])
