"""Sparse storage, direct factorization and the dense symmetric eigensolver.

Sparse matrices are ``scipy.sparse.csr_matrix`` instances; dense ones are
plain 2D numpy arrays.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .errors import DimensionMismatch, NotSymmetric, SingularMatrix

PIVOT_TOL = 1e-14
SYMMETRY_TOL = 1e-12


def as_csr(A):
    """Return ``A`` as canonical CSR (sorted indices, duplicates summed)."""
    A = sp.csr_matrix(A, dtype=float)
    A.sum_duplicates()
    A.sort_indices()
    return A


def check_csr(A):
    """Assert the CSR invariants; returns ``A`` for chaining."""
    n_rows, n_cols = A.shape
    ptr = A.indptr
    if len(ptr) != n_rows + 1 or np.any(np.diff(ptr) < 0):
        raise ValueError("row offsets must be nondecreasing with length n_rows+1")
    if A.nnz and (A.indices.min() < 0 or A.indices.max() >= n_cols):
        raise ValueError("column index out of range")
    for r in range(n_rows):
        cols = A.indices[ptr[r]:ptr[r + 1]]
        if len(np.unique(cols)) != len(cols):
            raise ValueError(f"duplicate column index in row {r}")
    return A


def spmv(A, x):
    """Sparse matrix-vector product ``A @ x`` on CSR storage."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or A.shape[1] != x.shape[0]:
        raise DimensionMismatch(f"cannot multiply {A.shape} by vector of length {x.shape}")
    A = as_csr(A)
    return _kernels.csr_matvec(A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data, x)


class Factorization:
    """LU factors of a square sparse matrix; ``solve`` is reentrant."""

    def __init__(self, lu, shape):
        self._lu = lu
        self.shape = shape

    def solve(self, b, trans=False):
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.shape[0]:
            raise DimensionMismatch(f"rhs length {b.shape[0]} does not match {self.shape}")
        return self._lu.solve(b, trans="T" if trans else "N")


def lu_factorize(A):
    """Sparse LU with partial pivoting (SuperLU).

    Raises
    ------
    SingularMatrix
        If factorization breaks down or a pivot falls below ``PIVOT_TOL``
        relative to the largest pivot.
    """
    A = sp.csc_matrix(A, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got {A.shape}")
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SingularMatrix(str(exc)) from exc
    piv = np.abs(lu.U.diagonal())
    if piv.size and (not np.all(np.isfinite(piv)) or piv.min() <= PIVOT_TOL * piv.max()):
        raise SingularMatrix(f"pivot ratio {piv.min() / max(piv.max(), 1e-300):.3e} below {PIVOT_TOL}")
    return Factorization(lu, A.shape)


def solve(A, b):
    return lu_factorize(A).solve(b)


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def sym_eig(C, tol=SYMMETRY_TOL):
    """Eigen-decomposition of a dense symmetric matrix, sorted by decreasing magnitude."""
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {C.shape}")
    scale = max(np.abs(C).max(initial=0.0), 1e-300)
    if np.abs(C - C.T).max(initial=0.0) > tol * scale:
        raise NotSymmetric("matrix is not symmetric within tolerance")
    lam, Q = scipy.linalg.eigh(0.5 * (C + C.T))
    order = np.argsort(-np.abs(lam), kind="stable")
    return EigenDecomposition(lam[order], Q[:, order])
