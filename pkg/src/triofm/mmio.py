"""Matrix Market and plain-text interchange (17 significant digits)."""

from __future__ import annotations

import numpy as np
import scipy.io
import scipy.sparse as sp

from .linalg import MatrixOperator

PRECISION = 17


def write_operator(path, op):
    """Dense operators go out in array format, everything else as coordinates."""
    if op.kind == "dense":
        data = op.matrix
    elif op.kind == "sparse":
        data = op.matrix
    elif op.kind == "diagonal":
        data = sp.diags(op.matrix, format="coo")
    else:
        data = sp.coo_matrix(op.to_dense())
    scipy.io.mmwrite(str(path), data, precision=PRECISION,
                     symmetry="symmetric" if op.kind == "dense" else None)


def read_operator(path):
    m = scipy.io.mmread(str(path))
    if sp.issparse(m):
        return MatrixOperator.from_sparse(m)
    return MatrixOperator.from_dense(np.asarray(m))


def write_block(path, x):
    scipy.io.mmwrite(str(path), np.asarray(x, dtype=np.float64), precision=PRECISION)


def read_block(path):
    return np.asfortranarray(np.asarray(scipy.io.mmread(str(path)), dtype=np.float64))


def write_eigenvalues(path, values):
    with open(path, "w") as fh:
        for v in np.asarray(values, dtype=np.float64):
            fh.write(format(float(v), ".17g") + "\n")


def read_eigenvalues(path):
    return np.loadtxt(path, dtype=np.float64, ndmin=1)
