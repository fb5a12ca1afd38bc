"""Test matrix families: prescribed random spectra, a 1D Schrodinger operator
and the momentum-space Hubbard Hamiltonian in a determinant basis."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import ConfigError
from .linalg import MatrixOperator, random_orthogonal
from .metrics import ReferenceEigen

SPECTRUM_FAMILIES = ("uniform", "logarithm", "ushape", "explicit")
USHAPE_HEAD = np.array([-14.0, -10.0, -8.0, -7.0, -5.0]) / 16.0
SPARSE_DIMENSION_BOUND = 20000


# ---------------------------------------------------------------------------
# random matrices with a prescribed spectrum


@dataclass(frozen=True)
class SpectrumSpec:
    family: str = "uniform"
    n: int = 500
    seed: int = 0
    values: tuple = ()

    def __post_init__(self):
        if self.family not in SPECTRUM_FAMILIES:
            raise ConfigError(f"unknown spectrum family {self.family!r}")
        if self.n < 1:
            raise ConfigError("n must be positive")
        if self.family == "explicit" and len(self.values) != self.n:
            raise ConfigError("explicit spectrum needs exactly n values")


def spectrum(spec):
    """Eigenvalues of the family, ascending."""
    n = spec.n
    i = np.arange(1, n + 1, dtype=np.float64)
    if spec.family == "uniform":
        lam = (i - 1.0) / n - 1.0
    elif spec.family == "logarithm":
        lam = -(2.0 ** 10 / 500.0) * 0.5 ** i
    elif spec.family == "ushape":
        lam = np.full(n, -1.0 / 16.0)
        k = min(n, USHAPE_HEAD.size)
        lam[:k] = USHAPE_HEAD[:k]
    else:
        lam = np.asarray(spec.values, dtype=np.float64)
    if not np.all(np.isfinite(lam)):
        raise ConfigError("spectrum contains non-finite values")
    return np.sort(lam)


def build_random(spec):
    """``A = U^T diag(lambda) U`` with a seeded random orthogonal ``U``.

    Returns
    -------
    op : MatrixOperator
        Dense operator with exact norm estimate.
    ref : ReferenceEigen
        All eigenpairs; eigenvectors are the rows of ``U``.
    """
    lam = spectrum(spec)
    u = random_orthogonal(spec.n, spec.seed)
    a = (u.T * lam) @ u
    a = 0.5 * (a + a.T)
    rho = float(np.max(np.abs(lam)))
    return MatrixOperator.from_dense(a, norm_estimate=rho), ReferenceEigen(lam, u.T.copy(), rho)


# ---------------------------------------------------------------------------
# periodic 1D Schrodinger operator


@dataclass(frozen=True)
class DftSpec:
    n: int = 500
    sigma: float = 0.1
    n_wells: int = 4

    def __post_init__(self):
        if self.n < 3:
            raise ConfigError("the periodic stencil needs n >= 3")
        if not self.sigma > 0:
            raise ConfigError("well width sigma must be positive")

    @property
    def centers(self):
        i = np.arange(1, self.n_wells + 1)
        return (2 * i - 1) / (2.0 * self.n_wells)

    @property
    def depths(self):
        i = np.arange(1, self.n_wells + 1)
        return 850.0 + 50.0 * np.mod(i, 4)


def dft_potential(x, spec=DftSpec()):
    """Sum of Gaussian wells, no periodic images."""
    x = np.asarray(x, dtype=np.float64)[..., None]
    return -np.sum(spec.depths * np.exp(-((x - spec.centers) ** 2) / (2.0 * spec.sigma ** 2)),
                   axis=-1)


def build_dft(spec=DftSpec()):
    """``-Laplacian + V`` on ``x_j = j / n`` with periodic central differences."""
    n = spec.n
    h2 = float(n) ** 2
    x = np.arange(n) / n
    main = 2.0 * h2 + dft_potential(x, spec)
    off = -h2 * np.ones(n)
    a = sp.diags([main, off[:-1], off[:-1]], [0, 1, -1], shape=(n, n), format="lil")
    a[0, n - 1] = -h2
    a[n - 1, 0] = -h2
    a = a.tocsr()
    rho = float(np.max(np.abs(main)) + 2.0 * h2)
    return MatrixOperator.from_sparse(a, norm_estimate=rho)


# ---------------------------------------------------------------------------
# Hubbard model


@dataclass(frozen=True)
class HubbardSpec:
    lx: int = 4
    ly: int = 4
    n_up: int = 3
    n_dn: int = 3
    t: float = 1.0
    u: float | None = None

    def __post_init__(self):
        if self.lx < 1 or self.ly < 1:
            raise ConfigError("lattice sides must be positive")
        for ne in (self.n_up, self.n_dn):
            if not 0 <= ne <= self.n_orb:
                raise ConfigError(f"electron count {ne} outside [0, {self.n_orb}]")

    @property
    def n_orb(self):
        return self.lx * self.ly

    @property
    def interaction(self):
        """``U``; defaults to ``0.25 * N_orb``."""
        return 0.25 * self.n_orb if self.u is None else float(self.u)

    @property
    def dimension(self):
        return math.comb(self.n_orb, self.n_up) * math.comb(self.n_orb, self.n_dn)


def momentum_grid(spec):
    """``k`` for every orbital ``o = m1 * ly + m2``: rows ``(2 pi m1/lx, 2 pi m2/ly)``."""
    m1, m2 = np.divmod(np.arange(spec.n_orb), spec.ly)
    return np.column_stack([2 * np.pi * m1 / spec.lx, 2 * np.pi * m2 / spec.ly])


def _sector(n_orb, ne):
    dets = sorted(sum(1 << o for o in occ) for occ in itertools.combinations(range(n_orb), ne))
    return np.array(dets, dtype=np.int64)


@dataclass
class FciBasis:
    """Determinant basis ``index = i_up * n_dn_dets + i_dn``.

    Each spin sector lists occupation bitsets (bit ``o`` = orbital ``o``)
    in increasing integer order.
    """

    n_orb: int
    up: np.ndarray
    dn: np.ndarray
    k: np.ndarray
    _up_index: dict = field(default_factory=dict, repr=False)
    _dn_index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._up_index = {int(b): i for i, b in enumerate(self.up)}
        self._dn_index = {int(b): i for i, b in enumerate(self.dn)}

    def __len__(self):
        return self.up.size * self.dn.size

    def determinant(self, i):
        iu, idn = divmod(int(i), self.dn.size)
        return int(self.up[iu]), int(self.dn[idn])

    def index(self, up_bits, dn_bits):
        return self._up_index[int(up_bits)] * self.dn.size + self._dn_index[int(dn_bits)]


def enumerate_fci_basis(spec):
    return FciBasis(spec.n_orb, _sector(spec.n_orb, spec.n_up), _sector(spec.n_orb, spec.n_dn),
                    momentum_grid(spec))


def _hop_sign(bits, src, dst):
    """Sign of ``a+_dst a_src`` on an occupied ``src``: parity of orbitals strictly between."""
    lo, hi = (src, dst) if src < dst else (dst, src)
    between = (bits >> (lo + 1)) & ((1 << (hi - lo - 1)) - 1) if hi > lo + 1 else 0
    return -1.0 if bin(between).count("1") % 2 else 1.0


def _shift_table(spec):
    """``table[o, q] = orbital of k_o + k_q`` (componentwise modulo the lattice)."""
    m1, m2 = np.divmod(np.arange(spec.n_orb), spec.ly)
    s1 = (m1[:, None] + m1[None, :]) % spec.lx
    s2 = (m2[:, None] + m2[None, :]) % spec.ly
    return s1 * spec.ly + s2


def _neg(spec):
    m1, m2 = np.divmod(np.arange(spec.n_orb), spec.ly)
    return ((-m1) % spec.lx) * spec.ly + (-m2) % spec.ly


def _scatter(dets, index, n_orb, dest_of):
    """Sparse one-body operator ``sum_o a+_{dest_of[o]} a_o`` on one spin sector."""
    rows, cols, vals = [], [], []
    for j, bits in enumerate(dets):
        bits = int(bits)
        for o in range(n_orb):
            if not bits >> o & 1:
                continue
            d = int(dest_of[o])
            if d != o and bits >> d & 1:
                continue
            new = (bits & ~(1 << o)) | (1 << d)
            rows.append(index[new])
            cols.append(j)
            vals.append(_hop_sign(bits, o, d) if d != o else 1.0)
    n = len(dets)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _dispersion(spec, basis):
    eps = -2.0 * spec.t * (np.cos(basis.k[:, 0]) + np.cos(basis.k[:, 1]))

    def sector(dets):
        occ = (dets[:, None] >> np.arange(spec.n_orb)) & 1
        return occ @ eps

    return sector(basis.up), sector(basis.dn)


class HubbardHamiltonian:
    """Kronecker-structured Hubbard Hamiltonian on an :class:`FciBasis`.

    ``H = T_up (x) I + I (x) T_dn + (U/N) N_up N_dn
    + (U/N) sum_{q != 0} R_up(q) (x) R_dn(q)`` where ``R_up(q)`` moves an up
    electron ``p -> p - q`` and ``R_dn(q)`` moves a down electron
    ``k -> k + q``.
    """

    def __init__(self, spec, basis=None):
        self.spec = spec
        self.basis = enumerate_fci_basis(spec) if basis is None else basis
        b = self.basis
        ups, dns = _dispersion(spec, b)
        g = spec.interaction / spec.n_orb
        self.coupling = g
        self.diagonal = (ups[:, None] + dns[None, :]).ravel() + g * spec.n_up * spec.n_dn
        shift, neg = _shift_table(spec), _neg(spec)
        self.terms = []
        for q in range(1, spec.n_orb):
            r_up = _scatter(b.up, b._up_index, spec.n_orb, shift[:, neg[q]])
            r_dn = _scatter(b.dn, b._dn_index, spec.n_orb, shift[:, q])
            self.terms.append((r_up, r_dn))

    @property
    def dimension(self):
        return len(self.basis)

    def matvec(self, x):
        nu, nd = self.basis.up.size, self.basis.dn.size
        y = self.diagonal * x
        xm = x.reshape(nu, nd)
        acc = np.zeros((nu, nd))
        for r_up, r_dn in self.terms:
            acc += (r_dn @ (r_up @ xm).T).T
        return y + self.coupling * acc.ravel()

    def to_sparse(self):
        nu, nd = self.basis.up.size, self.basis.dn.size
        h = sp.diags(self.diagonal, format="csr")
        off = sp.csr_matrix((nu * nd, nu * nd))
        for r_up, r_dn in self.terms:
            off = off + sp.kron(r_up, r_dn, format="csr")
        h = h + self.coupling * off
        h.eliminate_zeros()
        return h.tocsr()

    def norm_bound(self):
        nnz_row = sum(r_up.getnnz(axis=1).max() * r_dn.getnnz(axis=1).max()
                      for r_up, r_dn in self.terms) if self.terms else 0
        return float(np.max(np.abs(self.diagonal)) + self.coupling * nnz_row)


def build_hubbard(spec=HubbardSpec(), mode="auto", dimension_bound=SPARSE_DIMENSION_BOUND):
    """Hubbard FCI operator, assembled sparse or applied matrix-free.

    ``mode='auto'`` assembles a CSR matrix up to ``dimension_bound`` and
    switches to the matrix-free product beyond it.
    """
    if mode not in ("auto", "sparse", "matrix-free"):
        raise ConfigError(f"unknown Hubbard mode {mode!r}")
    dim = spec.dimension
    if mode == "sparse" and dim > dimension_bound:
        raise ConfigError(f"dimension {dim} exceeds the sparse bound {dimension_bound}; "
                          "use mode='matrix-free'")
    ham = HubbardHamiltonian(spec)
    if mode == "sparse" or (mode == "auto" and dim <= dimension_bound):
        return MatrixOperator.from_sparse(ham.to_sparse(), norm_estimate=ham.norm_bound())
    op = MatrixOperator.procedural(dim, ham.matvec, norm_estimate=ham.norm_bound())
    op.hamiltonian = ham
    return op


def total_momentum(spec, basis):
    """Total momentum index ``(M1 mod lx, M2 mod ly)`` of every basis state."""
    m1, m2 = np.divmod(np.arange(spec.n_orb), spec.ly)

    def sector(dets):
        occ = (dets[:, None] >> np.arange(spec.n_orb)) & 1
        return occ @ m1, occ @ m2

    u1, u2 = sector(basis.up)
    d1, d2 = sector(basis.dn)
    t1 = (u1[:, None] + d1[None, :]).ravel() % spec.lx
    t2 = (u2[:, None] + d2[None, :]).ravel() % spec.ly
    return t1 * spec.ly + t2


# ---------------------------------------------------------------------------
# dispatch


def build_problem(spec):
    """Build ``(operator, reference or None)`` from a SpectrumSpec, DftSpec or HubbardSpec."""
    if isinstance(spec, SpectrumSpec):
        return build_random(spec)
    if isinstance(spec, DftSpec):
        return build_dft(spec), None
    if isinstance(spec, HubbardSpec):
        return build_hubbard(spec), None
    raise ConfigError(f"unsupported problem spec {type(spec).__name__}")
