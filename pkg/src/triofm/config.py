"""Flat ``key = value`` run configuration.

Example::

    # problem
    problem = uniform        # uniform | logarithm | ushape | dft | hubbard | matrix
    n = 500
    seed = 0
    # solver
    method = triofm          # triofm | ofm
    objective = obj1
    acceleration = cg        # none | momentum | cg
    stepsize = exact         # exact | fixed | exact-full | exact-columnwise
    tolerance = 1e-8
    p = 10
    # ensembles
    runs = 20
    methods = triofm-cg, ofm-cg, triofm-momentum-nolock

Blank lines and ``#`` comments are ignored.  Unknown keys are errors.
"""

from __future__ import annotations

from dataclasses import dataclass

from .exceptions import ConfigError
from .linesearch import StepsizeStrategy
from .problems import DftSpec, HubbardSpec, SpectrumSpec
from .solver import SolverConfig


def _bool(v):
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _opt_float(v):
    return None if v.strip().lower() in ("auto", "none", "") else float(v)


def _list(v):
    return [s.strip() for s in v.split(",") if s.strip()]


SCHEMA = {
    "problem": str, "n": int, "seed": int, "values": _list, "matrix": str,
    "sigma": float, "lx": int, "ly": int, "n_up": int, "n_dn": int,
    "hopping": float, "interaction": _opt_float, "hubbard_mode": str,
    "reference": str,
    "method": str, "objective": str, "acceleration": str, "momentum_beta": _opt_float,
    "cg_clamp": _bool, "stepsize": str, "alpha": _opt_float, "root_form": str,
    "tolerance": float, "max_iterations": int, "locking": _bool, "stopping": str,
    "residual_every": int, "p": int, "init_seed": int,
    "runs": int, "methods": _list,
}

DEFAULTS = {
    "problem": "uniform", "n": 500, "seed": 0, "sigma": 0.1, "lx": 4, "ly": 4,
    "n_up": 3, "n_dn": 3, "hopping": 1.0, "interaction": None, "hubbard_mode": "auto",
    "reference": "auto",
    "method": "triofm", "objective": "obj1", "acceleration": "cg", "momentum_beta": None,
    "cg_clamp": True, "stepsize": "exact", "alpha": None, "root_form": "direction",
    "tolerance": 1e-8, "max_iterations": 10000, "locking": None, "stopping": "either",
    "residual_every": 10, "p": 10, "init_seed": 1000, "runs": 20,
    "methods": ["triofm-cg"],
}

ACCEL_ALIASES = {"gd": "none", "none": "none", "momentum": "momentum", "cg": "cg"}


def parse_config(text):
    """Parse config text into a dict with defaults filled in."""
    out = dict(DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            out[key] = SCHEMA[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return out


def load_config(path):
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def problem_spec(cfg):
    """The problem spec described by ``cfg`` (``None`` for ``problem = matrix``)."""
    kind = cfg["problem"]
    if kind in ("uniform", "logarithm", "ushape"):
        return SpectrumSpec(kind, cfg["n"], cfg["seed"])
    if kind == "explicit":
        vals = tuple(float(v) for v in cfg.get("values", ()))
        return SpectrumSpec("explicit", len(vals), cfg["seed"], vals)
    if kind == "dft":
        return DftSpec(cfg["n"], cfg["sigma"])
    if kind == "hubbard":
        return HubbardSpec(cfg["lx"], cfg["ly"], cfg["n_up"], cfg["n_dn"], cfg["hopping"],
                           cfg["interaction"])
    if kind == "matrix":
        return None
    raise ConfigError(f"unknown problem {kind!r}")


@dataclass(frozen=True)
class Method:
    """One cell of a benchmark grid, e.g. ``triofm-cg`` or ``ofm-momentum``."""

    triangularized: bool = True
    acceleration: str = "cg"
    locking: bool = True

    @classmethod
    def parse(cls, token):
        parts = token.strip().lower().split("-")
        if len(parts) not in (2, 3) or parts[0] not in ("triofm", "ofm"):
            raise ConfigError(f"bad method {token!r}; use e.g. triofm-cg or ofm-momentum")
        if parts[1] not in ACCEL_ALIASES:
            raise ConfigError(f"unknown acceleration in method {token!r}")
        tri = parts[0] == "triofm"
        locking = tri
        if len(parts) == 3:
            if parts[2] not in ("lock", "nolock"):
                raise ConfigError(f"bad locking suffix in method {token!r}")
            locking = parts[2] == "lock"
        if locking and not tri:
            raise ConfigError("locking is only available for triofm methods")
        return cls(tri, ACCEL_ALIASES[parts[1]], locking)

    @property
    def label(self):
        acc = {"none": "gd"}.get(self.acceleration, self.acceleration)
        name = f"{'triofm' if self.triangularized else 'ofm'}-{acc}"
        if self.triangularized and not self.locking:
            name += "-nolock"
        return name


def solver_config(cfg, method=None):
    """Build a :class:`SolverConfig`; ``method`` overrides method/acceleration/locking."""
    if cfg["method"] not in ("triofm", "ofm"):
        raise ConfigError(f"unknown method {cfg['method']!r}")
    tri = cfg["method"] == "triofm"
    acc = ACCEL_ALIASES.get(cfg["acceleration"])
    if acc is None:
        raise ConfigError(f"unknown acceleration {cfg['acceleration']!r}")
    locking = tri if cfg["locking"] is None else cfg["locking"]
    if method is not None:
        tri, acc, locking = method.triangularized, method.acceleration, method.locking
    kind = cfg["stepsize"]
    if kind == "exact":
        kind = "exact-columnwise" if tri else "exact-full"
    step = StepsizeStrategy(kind, cfg["alpha"], cfg["root_form"])
    return SolverConfig(objective=cfg["objective"], triangularized=tri, stepsize=step,
                        acceleration=acc, momentum_beta=cfg["momentum_beta"],
                        cg_clamp=cfg["cg_clamp"], tolerance=cfg["tolerance"],
                        max_iterations=cfg["max_iterations"], locking=locking,
                        stopping=cfg["stopping"], residual_every=cfg["residual_every"],
                        seed=cfg["init_seed"])
