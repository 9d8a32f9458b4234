"""Proper orthogonal decomposition of snapshot matrices in component inner products."""
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import RankDeficient, RankDeficientWarning
from ..linalg import sym_eig

log = logging.getLogger(__name__)

TRUNCATION = 1e-12


def inner_products(coupled):
    """Inner-product matrices: H1 seminorm for velocities, supremizers and adjoints,
    L2 for pressures, interface L2 for the control."""
    X = {"g": coupled.interface.M2}
    for i, s in enumerate(coupled.spaces, start=1):
        X[f"u{i}"] = X[f"s{i}"] = X[f"xi{i}"] = s.K
        X[f"p{i}"] = s.Mp
    return X


@dataclass
class PodBasis:
    """Per-component orthonormal modes (columns) and full eigenvalue spectra."""

    modes: dict
    eigenvalues: dict
    n_max: int
    n_snapshots: dict = field(default_factory=dict)

    def n(self, comp):
        return self.modes[comp].shape[1]

    def retained_energy(self, comp, n_max=None):
        """``E_n = sum_{k<=n} |lam_k| / sum_{k<=N} |lam_k|`` for ``n = 1..N``."""
        lam = np.abs(self.eigenvalues[comp][: n_max or self.n_max])
        return np.cumsum(lam) / lam.sum()

    def project(self, comp, X, v, n=None):
        Phi = self.modes[comp][:, :n]
        return Phi.T @ (X @ v)

    def expand(self, comp, coeffs):
        return self.modes[comp][:, : len(coeffs)] @ coeffs


def _orthonormalise(Phi, X, passes=2):
    """X-orthonormalise the columns keeping every leading span (Cholesky of the Gram matrix)."""
    for _ in range(passes):
        G = Phi.T @ (X @ Phi)
        L = np.linalg.cholesky(0.5 * (G + G.T))
        Phi = np.linalg.solve(L, Phi.T).T
    return Phi


def pod(S, X, n_max, tol=TRUNCATION, strict=False, name="component"):
    """POD of the columns of ``S`` in the inner product ``X``.

    Returns ``(modes, eigenvalues)`` with at most ``n_max`` modes, keeping
    only eigenvalues above ``tol * lam_1``.

    Raises
    ------
    RankDeficient
        In ``strict`` mode when fewer than ``n_max`` modes pass the threshold;
        otherwise a :class:`RankDeficientWarning` is issued and the achievable
        number of modes is returned.
    """
    S = np.asarray(S, dtype=float)
    C = S.T @ (X @ S)
    C = 0.5 * (C + C.T)
    eig = sym_eig(C)
    lam, Q = eig.eigenvalues, eig.eigenvectors
    top = abs(lam[0]) if lam.size else 0.0
    keep = int(np.sum(lam[: n_max] > tol * top)) if top > 0 else 0
    if keep < n_max:
        msg = f"{name}: only {keep} of {n_max} requested modes exceed {tol:g} * lambda_1"
        if strict:
            raise RankDeficient(msg, keep)
        warnings.warn(msg, RankDeficientWarning, stacklevel=2)
    Phi = S @ Q[:, :keep] / np.sqrt(lam[:keep])
    if keep:
        Phi = _orthonormalise(Phi, X)
    return Phi, lam


def compress(snapshots, n_max, inner, components=None, tol=TRUNCATION, strict=False):
    """POD of every snapshot component; ``inner`` maps component names to matrices."""
    modes, eigs, counts = {}, {}, {}
    for comp in components or snapshots.data:
        S = snapshots.data[comp]
        Phi, lam = pod(S, inner[comp], n_max, tol, strict, comp)
        modes[comp], eigs[comp], counts[comp] = Phi, lam, S.shape[1]
        log.info("POD %s: %d snapshots, %d modes, lambda_1 %.3e", comp, S.shape[1], Phi.shape[1],
                 lam[0] if lam.size else 0.0)
    return PodBasis(modes, eigs, n_max, counts)
