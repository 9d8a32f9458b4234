"""Assembly of the diffusion, divergence and convection forms and interface loads.

Every routine accepts a :class:`~ddrom.fem.space.TaylorHoodSpace` or anything
with a ``space`` attribute (such as a subdomain problem) and returns operators
on the full, unconstrained velocity/pressure numbering.
"""
import numpy as np
import scipy.sparse as sp

from .. import _kernels
from ..errors import DimensionMismatch

CONVECTION_MODES = ("full", "linearized-first", "linearized-second")


def _space(p):
    return getattr(p, "space", p)


def assemble_diffusion(p, nu=1.0):
    """Vector stiffness ``nu (grad u, grad v)``."""
    return nu * _space(p).K


def assemble_divergence(p):
    """Rectangular ``b(v, q) = -(div v, q)`` with pressure rows and velocity columns."""
    return _space(p).B


def convection_blocks(space, w):
    """Element blocks of the two linearisations of ``c`` at ``w``.

    Returns ``adv`` (m, 6, 6) for ``c(w, ., .)`` per component, ``jac1``
    (m, 2, 2, 6, 6) for ``c(., w, .)`` and ``vec`` (m, 2, 6) for ``c(w, w, .)``.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (space.n_u,):
        raise DimensionMismatch(f"velocity of length {w.shape} on a space with {space.n_u} velocity dofs")
    return _kernels.convection_local(space.cell_nodes, space.phi, space.dphi, space.wts,
                                     np.ascontiguousarray(w.reshape(2, space.n_nodes)))


def velocity_block_values(space, adv=None, jac1=None, diag=None):
    """Values in the ``(m, 2, 2, 6, 6)`` velocity pattern of ``space``.

    ``adv`` and ``diag`` are component-diagonal (m, 6, 6) blocks, ``jac1`` is full.
    """
    m = len(space.triangles)
    vals = np.zeros((m, 2, 2, 6, 6))
    for blk in (adv, diag):
        if blk is not None:
            vals[:, 0, 0] += blk
            vals[:, 1, 1] += blk
    if jac1 is not None:
        vals += jac1
    return vals


def assemble_convection(p, w, mode="full"):
    """Matrix of the convection form frozen at ``w``.

    ``full`` and ``linearized-second`` give ``A`` with ``v.A u = c(w, u, v)``
    (so ``A w`` is the residual ``c(w, w, .)``); ``linearized-first`` gives
    ``v.A u = c(u, w, v)``.
    """
    if mode not in CONVECTION_MODES:
        raise ValueError(f"unknown convection mode {mode!r}")
    space = _space(p)
    adv, jac1, _ = convection_blocks(space, w)
    vals = velocity_block_values(space, jac1=jac1) if mode == "linearized-first" else velocity_block_values(space, adv=adv)
    return sp.csr_matrix((vals.ravel(), (space._v_rows, space._v_cols)), shape=(space.n_u, space.n_u))


def convection_vector(space, w):
    """Residual vector ``c(w, w, v)`` for every velocity basis function ``v``."""
    _, _, vec = convection_blocks(space, w)
    return space.scatter_vector(vec)


def assemble_interface_load(p, g):
    """Load ``sign * (g, v)_interface`` on the velocity dofs of a subdomain problem."""
    g = np.asarray(g, dtype=float)
    itf = p.interface
    if g.shape != (itf.n_control,):
        raise DimensionMismatch(f"control of length {g.shape}, expected {itf.n_control}")
    return p.sign * (itf.restriction(p.index).T @ (itf.M2 @ g))
