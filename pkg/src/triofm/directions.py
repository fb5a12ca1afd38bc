"""Objective values, gradients and triangularized search directions.

Every direction is formed as one operator product ``A X`` followed by
small ``p x p`` Gram matrices, so the ``n``-sized work is confined to one
operator application and a handful of block updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError
from .linalg import BlockVector, gram, matmul_small

OBJECTIVES = ("obj1", "obj2")


@dataclass(frozen=True)
class DirectionKind:
    """Which direction field drives the iteration.

    ``triangularized=True`` gives the TriOFM fields ``g1``/``g2``; otherwise
    the gradient of the objective with its constant factor dropped
    (``grad f1 / 4`` or ``grad f2 / 2``), i.e. the OFM baseline.
    """

    objective: str = "obj1"
    triangularized: bool = True

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"unknown objective {self.objective!r}")


def _arr(x):
    if isinstance(x, BlockVector):
        return x.data
    x = np.asarray(x, dtype=np.float64)
    return x[:, None] if x.ndim == 1 else x


def eval_f1(a, x):
    """Trace form ``tr(2 X^T A X + (X^T X)^2)``.

    This equals ``||A + X X^T||_F^2 - ||A||_F^2``; the constant is dropped.
    """
    x = _arr(x)
    ax = a.apply(x)
    xx = gram(x)
    return 2.0 * np.trace(gram(x, ax)) + float(np.sum(xx * xx))


def eval_f2(a, x):
    """``tr((2I - X^T X) X^T A X)``."""
    x = _arr(x)
    ax = a.apply(x)
    xax = gram(x, ax)
    xax = 0.5 * (xax + xax.T)
    xx = gram(x)
    return 2.0 * np.trace(xax) - float(np.sum(xx * xax))


def grad_f1(a, x):
    """``4 A X + 4 X X^T X``."""
    x = _arr(x)
    ax = a.apply(x)
    return 4.0 * ax + 4.0 * matmul_small(x, gram(x))


def grad_f2(a, x):
    """``4 A X - 2 X X^T A X - 2 A X X^T X``."""
    x = _arr(x)
    ax = a.apply(x)
    return 4.0 * ax - 2.0 * matmul_small(x, gram(x, ax)) - 2.0 * matmul_small(ax, gram(x))


def g1(a, x):
    """TriOFM direction for Obj1: ``A X + X triu(X^T X)``."""
    x = _arr(x)
    return g1_from_product(x, a.apply(x))


def g2(a, x):
    """TriOFM direction for Obj2: ``2 A X - A X triu(X^T X) - X triu(X^T A X)``."""
    x = _arr(x)
    return g2_from_product(x, a.apply(x))


def g1_from_product(x, ax, triangular=True):
    xx = gram(x)
    if triangular:
        xx = np.triu(xx)
    return ax + matmul_small(x, xx)


def g2_from_product(x, ax, triangular=True):
    xx = gram(x)
    xax = gram(x, ax)
    if triangular:
        xx = np.triu(xx)
        xax = np.triu(xax)
    else:
        xax = 0.5 * (xax + xax.T)
    return 2.0 * ax - matmul_small(ax, xx) - matmul_small(x, xax)


def direction_from_product(kind, x, ax):
    """Evaluate the direction field of ``kind`` given ``ax = A @ x``."""
    if kind.objective == "obj1":
        return g1_from_product(x, ax, kind.triangularized)
    return g2_from_product(x, ax, kind.triangularized)


def direction(a, x, kind):
    x = _arr(x)
    return direction_from_product(kind, x, a.apply(x))
