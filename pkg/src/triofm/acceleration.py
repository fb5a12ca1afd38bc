"""Momentum and Polak-Ribiere CG updates on top of a direction field.

Every update here returns a *search direction* ``D`` and the solver steps
``X <- X + alpha D``.  For momentum the accumulated vector ``V`` points
uphill (``V = beta G + (1 - beta) V_prev``) so ``D = -V``; for CG the
vectors already point downhill.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError

ACCEL_KINDS = ("none", "momentum", "cg")

DEFAULT_MOMENTUM = {"obj1": 0.9, "obj2": 0.95}


@dataclass
class AccelState:
    """History carried between iterations.

    Attributes
    ----------
    kind : {'none', 'momentum', 'cg'}
    beta : float
        Momentum discount, only used when ``kind == 'momentum'``.
    clamp : bool
        PR+ safeguard ``beta_i >= 0`` for CG.
    v_prev, g_prev : ndarray or None
        Previous accumulated direction and previous raw direction field.
    block_beta : bool
        Use a single trace-based CG coefficient for the whole block
        (only meaningful for the non-triangularized baselines).
    """

    kind: str = "none"
    beta: float = 0.9
    clamp: bool = True
    block_beta: bool = False
    v_prev: np.ndarray | None = None
    g_prev: np.ndarray | None = None
    restarts: int = field(default=0)

    def __post_init__(self):
        if self.kind not in ACCEL_KINDS:
            raise ConfigError(f"unknown acceleration {self.kind!r}")
        if self.kind == "momentum":
            _check_beta(self.beta)

    def reset(self):
        self.v_prev = None
        self.g_prev = None


def _check_beta(beta):
    if not 0.0 < beta <= 1.0:
        raise ConfigError(f"momentum beta must lie in (0, 1], got {beta}")


def momentum_update(g, state, beta=None, start=0):
    """``V = beta G + (1 - beta) V_prev`` on columns ``start:``.

    Columns before ``start`` (locked) keep their previous value.  The
    returned array is the accumulated ``V``; step along ``-V``.
    """
    beta = state.beta if beta is None else beta
    _check_beta(beta)
    g = np.asarray(g, dtype=np.float64)
    if state.v_prev is None:
        v = np.zeros_like(g, order="F")
    else:
        v = np.array(state.v_prev, order="F", copy=True)
    v[:, start:] = beta * g[:, start:] + (1.0 - beta) * v[:, start:]
    state.v_prev = v
    state.g_prev = np.array(g, order="F", copy=True)
    return v


def cg_beta_columnwise(g_curr, g_prev, clamp=True):
    """Polak-Ribiere coefficient for one column.

    Returns
    -------
    beta : float
    restart : bool
        True when ``g_prev`` vanishes and the direction must be reset.
    """
    den = float(np.dot(g_prev, g_prev))
    if den == 0.0:
        return 0.0, True
    beta = float(np.dot(g_curr - g_prev, g_curr)) / den
    if clamp:
        beta = max(beta, 0.0)
    return beta, False


def cg_beta_block(g_curr, g_prev, clamp=True):
    """Block PR coefficient ``tr((G - G_prev)^T G) / tr(G_prev^T G_prev)``."""
    den = float(np.sum(g_prev * g_prev))
    if den == 0.0:
        return 0.0, True
    beta = float(np.sum((g_curr - g_prev) * g_curr)) / den
    if clamp:
        beta = max(beta, 0.0)
    return beta, False


def cg_direction_update(g, state, start=0):
    """Columnwise CG: ``v_i = -g_i + beta_i v_i_prev`` for columns ``start:``.

    The first call returns ``-G``.  Columns before ``start`` are frozen.
    """
    g = np.asarray(g, dtype=np.float64)
    p = g.shape[1]
    if state.v_prev is None or state.g_prev is None:
        v = np.zeros_like(g, order="F")
        v[:, start:] = -g[:, start:]
    else:
        v = np.array(state.v_prev, order="F", copy=True)
        if state.block_beta:
            beta, restart = cg_beta_block(g[:, start:], state.g_prev[:, start:], state.clamp)
            state.restarts += int(restart)
            v[:, start:] = -g[:, start:] + beta * v[:, start:]
        else:
            for i in range(start, p):
                beta, restart = cg_beta_columnwise(g[:, i], state.g_prev[:, i], state.clamp)
                state.restarts += int(restart)
                v[:, i] = -g[:, i] + beta * v[:, i]
    state.v_prev = v
    state.g_prev = np.array(g, order="F", copy=True)
    return v


def search_direction(g, state, start=0):
    """Downhill search direction ``D`` for the configured acceleration."""
    if state.kind == "momentum":
        d = -momentum_update(g, state, start=start)
    elif state.kind == "cg":
        d = cg_direction_update(g, state, start=start).copy(order="F")
    else:
        d = -np.asarray(g, dtype=np.float64)
        d = np.asfortranarray(d)
    d[:, :start] = 0.0
    return d
