"""Hot numeric loops: element convection blocks, CSR products, trilinear tensors.

Every kernel has a pure-numpy implementation (``*_numpy``) and a numba one
(``*_numba``). The public names dispatch to numba unless it is missing or the
environment variable ``DDROM_NUMBA`` is set to ``0``/``false``/``off``; the
choice is made once at import time.
"""
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_FLAG = os.environ.get("DDROM_NUMBA", "1").strip().lower()
USE_NUMBA = numba is not None and _FLAG not in ("0", "false", "off", "no")
BACKEND = "numba" if USE_NUMBA else "numpy"


# numpy implementations

def convection_local_numpy(cell_nodes, phi, dphi, wts, w):
    """Element blocks of the trilinear form c(u, w, v) = ((u.grad) w, v).

    Parameters
    ----------
    cell_nodes : (m, 6) int array
    phi : (nq, 6) basis values at quadrature points
    dphi : (m, nq, 6, 2) physical basis gradients
    wts : (m, nq) quadrature weights including the Jacobian
    w : (2, n_nodes) nodal values of the frozen velocity

    Returns
    -------
    adv : (m, 6, 6)  ``adv[e, i, j] = int (w.grad phi_j) phi_i``
    jac1 : (m, 2, 2, 6, 6)  ``jac1[e, a, b, i, j] = int phi_j d_b w_a phi_i``
    vec : (m, 2, 6)  ``vec[e, a, i] = int ((w.grad) w)_a phi_i``
    """
    wl = w[:, cell_nodes]                                   # (2, m, 6)
    wq = np.einsum("qi,ami->maq", phi, wl)                  # (m, 2, nq)
    gw = np.einsum("mqib,ami->mqab", dphi, wl)              # d_b w_a
    wphi = wts[:, :, None] * phi[None, :, :]                # (m, nq, 6)
    wdot = np.einsum("mbq,mqjb->mqj", wq, dphi)             # w . grad phi_j
    adv = np.einsum("mqi,mqj->mij", wphi, wdot)
    pp = np.einsum("mqi,qj->mqij", wphi, phi)
    jac1 = np.einsum("mqij,mqab->mabij", pp, gw)
    conv = np.einsum("mbq,mqab->mqa", wq, gw)
    vec = np.einsum("mqi,mqa->mai", wphi, conv)
    return adv, jac1, vec


def csr_matvec_numpy(indptr, indices, data, x):
    n = len(indptr) - 1
    prod = data * x[indices]
    out = np.zeros(n)
    rows = np.repeat(np.arange(n), np.diff(indptr))
    np.add.at(out, rows, prod)
    return out


def trilinear_tensor_numpy(U, G, V, wts):
    """``T[m, j, k] = sum_q wts[q] sum_ab U[q, b, j] G[q, a, b, k] V[q, a, m]``.

    ``U`` holds advecting fields, ``G[q, a, b, k] = d_b (field_k)_a`` the
    advected gradients and ``V`` the test fields, all sampled at the same
    quadrature points.
    """
    W = np.einsum("qbj,qabk->qajk", U * wts[:, None, None], G, optimize=True)
    nq, _, nj, nk = W.shape
    T = V.reshape(nq * 2, -1).T @ W.reshape(nq * 2, nj * nk)
    return T.reshape(-1, nj, nk)


# numba implementations

if USE_NUMBA:
    _jit = numba.njit(cache=True, fastmath=False, nogil=True)

    @_jit
    def convection_local_numba(cell_nodes, phi, dphi, wts, w):
        m = cell_nodes.shape[0]
        nq = phi.shape[0]
        adv = np.zeros((m, 6, 6))
        jac1 = np.zeros((m, 2, 2, 6, 6))
        vec = np.zeros((m, 2, 6))
        wl = np.empty((2, 6))
        for e in range(m):
            for a in range(2):
                for i in range(6):
                    wl[a, i] = w[a, cell_nodes[e, i]]
            for q in range(nq):
                wx = 0.0
                wy = 0.0
                g00 = 0.0
                g01 = 0.0
                g10 = 0.0
                g11 = 0.0
                for i in range(6):
                    wx += wl[0, i] * phi[q, i]
                    wy += wl[1, i] * phi[q, i]
                    g00 += wl[0, i] * dphi[e, q, i, 0]
                    g01 += wl[0, i] * dphi[e, q, i, 1]
                    g10 += wl[1, i] * dphi[e, q, i, 0]
                    g11 += wl[1, i] * dphi[e, q, i, 1]
                c0 = wx * g00 + wy * g01
                c1 = wx * g10 + wy * g11
                wq = wts[e, q]
                for i in range(6):
                    pi = wq * phi[q, i]
                    vec[e, 0, i] += pi * c0
                    vec[e, 1, i] += pi * c1
                    for j in range(6):
                        adv[e, i, j] += pi * (wx * dphi[e, q, j, 0] + wy * dphi[e, q, j, 1])
                        pij = pi * phi[q, j]
                        jac1[e, 0, 0, i, j] += pij * g00
                        jac1[e, 0, 1, i, j] += pij * g01
                        jac1[e, 1, 0, i, j] += pij * g10
                        jac1[e, 1, 1, i, j] += pij * g11
        return adv, jac1, vec

    @_jit
    def csr_matvec_numba(indptr, indices, data, x):
        n = indptr.shape[0] - 1
        out = np.zeros(n)
        for r in range(n):
            acc = 0.0
            for k in range(indptr[r], indptr[r + 1]):
                acc += data[k] * x[indices[k]]
            out[r] = acc
        return out

    @_jit
    def _advect_stage(U, G, wts):
        nq = U.shape[0]
        nj = U.shape[2]
        nk = G.shape[3]
        W = np.zeros((nq, 2, nj, nk))
        for q in range(nq):
            for a in range(2):
                for j in range(nj):
                    u0 = U[q, 0, j] * wts[q]
                    u1 = U[q, 1, j] * wts[q]
                    for k in range(nk):
                        W[q, a, j, k] = u0 * G[q, a, 0, k] + u1 * G[q, a, 1, k]
        return W

    def trilinear_tensor_numba(U, G, V, wts):
        W = _advect_stage(np.ascontiguousarray(U), np.ascontiguousarray(G), np.ascontiguousarray(wts))
        nq, _, nj, nk = W.shape
        T = V.reshape(nq * 2, -1).T @ W.reshape(nq * 2, nj * nk)
        return T.reshape(-1, nj, nk)

    convection_local = convection_local_numba
    csr_matvec = csr_matvec_numba
    trilinear_tensor = trilinear_tensor_numba
else:
    convection_local = convection_local_numpy
    csr_matvec = csr_matvec_numpy
    trilinear_tensor = trilinear_tensor_numpy
