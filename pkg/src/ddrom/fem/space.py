"""Taylor-Hood P2/P1 spaces on a triangulated region and their constant operators."""
import numpy as np
import scipy.sparse as sp

from .quadrature import triangle_degree5

# local edge k of a triangle joins these two vertices; node 3 + k sits at its midpoint
LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


def _p2_reference(bary):
    """P2 values and barycentric-gradient coefficients at barycentric points.

    Returns ``phi`` (nq, 6) and ``coef`` (nq, 6, 3) such that
    ``grad phi_i = sum_k coef[q, i, k] grad lambda_k``.
    """
    nq = len(bary)
    phi = np.empty((nq, 6))
    coef = np.zeros((nq, 6, 3))
    for i in range(3):
        li = bary[:, i]
        phi[:, i] = li * (2.0 * li - 1.0)
        coef[:, i, i] = 4.0 * li - 1.0
    for k, (i, j) in enumerate(LOCAL_EDGES):
        phi[:, 3 + k] = 4.0 * bary[:, i] * bary[:, j]
        coef[:, 3 + k, i] = 4.0 * bary[:, j]
        coef[:, 3 + k, j] = 4.0 * bary[:, i]
    return phi, coef


class SparsePlan:
    """Fixed COO pattern compiled to CSR; ``build`` sums values into it.

    Entries whose row or column index is negative are dropped, which is how
    eliminated (Dirichlet) unknowns are removed.
    """

    def __init__(self, rows, cols, shape):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        self.keep = (rows >= 0) & (cols >= 0)
        key = rows[self.keep] * shape[1] + cols[self.keep]
        uniq, self.inv = np.unique(key, return_inverse=True)
        self.indices = (uniq % shape[1]).astype(np.int32)
        self.indptr = np.searchsorted(uniq // shape[1], np.arange(shape[0] + 1)).astype(np.int32)
        self.nnz = len(uniq)
        self.shape = shape

    def build(self, values):
        data = np.bincount(self.inv, weights=np.asarray(values).ravel()[self.keep], minlength=self.nnz)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=self.shape)


class TaylorHoodSpace:
    """Quadratic vector velocity and linear pressure on one triangulation.

    Velocity unknowns are stored component-blocked: dof ``c * n_nodes + k``
    is component ``c`` at P2 node ``k``. Nodes ``0 .. n_vertices-1`` are the
    mesh vertices, the rest are edge midpoints. Pressure dof ``k`` is vertex ``k``.

    ``vertex_ids`` carries the parent-mesh numbering so that nodes can be
    matched between spaces built on different submeshes.
    """

    def __init__(self, vertices, triangles, boundary_edges=None, vertex_ids=None, quadrature=triangle_degree5):
        self.vertices = np.asarray(vertices, dtype=float)
        self.triangles = np.asarray(triangles, dtype=np.int64)
        self.boundary_edges = dict(boundary_edges or {})
        nv = len(self.vertices)
        self.vertex_ids = np.arange(nv) if vertex_ids is None else np.asarray(vertex_ids, dtype=np.int64)
        m = len(self.triangles)

        pairs = np.stack([np.sort(self.triangles[:, list(e)], axis=1) for e in LOCAL_EDGES], axis=1)
        self.edges, inv = np.unique(pairs.reshape(-1, 2), axis=0, return_inverse=True)
        self.edge_index = {(int(a), int(b)): k for k, (a, b) in enumerate(self.edges)}
        self.cell_nodes = np.hstack([self.triangles, nv + inv.reshape(m, 3)])
        self.n_vertices = nv
        self.n_nodes = nv + len(self.edges)
        self.node_xy = np.vstack([self.vertices, self.vertices[self.edges].mean(axis=1)])
        gid = self.vertex_ids
        ge = np.sort(gid[self.edges], axis=1)
        self.node_keys = np.vstack([np.column_stack([gid, gid]), ge])
        self.n_u = 2 * self.n_nodes
        self.n_p = nv
        self.n = self.n_u + self.n_p

        self.boundary_nodes = {}
        for (a, b), tag in self.boundary_edges.items():
            nodes = self.boundary_nodes.setdefault(tag, set())
            nodes.update((a, b, nv + self.edge_index[(min(a, b), max(a, b))]))
        self.boundary_nodes = {t: np.array(sorted(s), dtype=np.int64) for t, s in self.boundary_nodes.items()}

        self._setup_quadrature(quadrature)
        self._assemble_constant()

    # geometry and quadrature

    def _setup_quadrature(self, quadrature):
        bary, w = quadrature()
        self.quad_bary = bary
        self.phi, coef = _p2_reference(bary)
        self.psi = bary.copy()                                   # P1 basis = barycentrics
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        self.areas = 0.5 * np.abs(det)
        # gradients of barycentrics: rows of the inverse Jacobian
        g1 = np.column_stack([d2[:, 1], -d2[:, 0]]) / det[:, None]
        g2 = np.column_stack([-d1[:, 1], d1[:, 0]]) / det[:, None]
        self.grad_bary = np.stack([-(g1 + g2), g1, g2], axis=1)  # (m, 3, 2)
        self.dphi = np.ascontiguousarray(np.einsum("qik,mkd->mqid", coef, self.grad_bary))
        self.wts = np.ascontiguousarray(self.areas[:, None] * w[None, :])
        xq = np.einsum("qk,mkd->mqd", bary, p)
        self.quad_xy = xq

    def _assemble_constant(self):
        m = len(self.triangles)
        cn, nN = self.cell_nodes, self.n_nodes
        wts, phi, dphi = self.wts, self.phi, self.dphi
        ks = np.einsum("mq,mqid,mqjd->mij", wts, dphi, dphi)
        ms = np.einsum("mq,qi,qj->mij", wts, phi, phi)
        mp = np.einsum("mq,qi,qj->mij", wts, self.psi, self.psi)
        # b(v, q) = -(div v, q):  bl[e, k, a, j] = -int psi_k d_a phi_j
        self.b_local = -np.einsum("mq,qk,mqja->mkaj", wts, self.psi, dphi)
        self.k_local = ks
        self.m_local = ms

        ri = np.repeat(cn[:, :, None], 6, axis=2)
        rj = np.repeat(cn[:, None, :], 6, axis=1)
        self.Ks = sp.csr_matrix((ks.ravel(), (ri.ravel(), rj.ravel())), shape=(nN, nN))
        self.Ms = sp.csr_matrix((ms.ravel(), (ri.ravel(), rj.ravel())), shape=(nN, nN))
        t = self.triangles
        pi = np.repeat(t[:, :, None], 3, axis=2)
        pj = np.repeat(t[:, None, :], 3, axis=1)
        self.Mp = sp.csr_matrix((mp.ravel(), (pi.ravel(), pj.ravel())), shape=(self.n_p, self.n_p))
        self.K = sp.block_diag([self.Ks, self.Ks], format="csr")
        self.M = sp.block_diag([self.Ms, self.Ms], format="csr")

        brow = np.broadcast_to(t[:, :, None, None], (m, 3, 2, 6))
        bcol = np.arange(2)[None, None, :, None] * nN + cn[:, None, None, :]
        bcol = np.broadcast_to(bcol, (m, 3, 2, 6))
        self.B = sp.csr_matrix((self.b_local.ravel(), (brow.ravel(), bcol.ravel())), shape=(self.n_p, self.n_u))
        self._b_rows, self._b_cols = brow.ravel(), bcol.ravel()

        a = np.arange(2)
        self._v_rows = np.broadcast_to(a[None, :, None, None, None] * nN + cn[:, None, None, :, None], (m, 2, 2, 6, 6)).ravel()
        self._v_cols = np.broadcast_to(a[None, None, :, None, None] * nN + cn[:, None, None, None, :], (m, 2, 2, 6, 6)).ravel()
        self._vec_rows = (a[None, :, None] * nN + cn[:, None, :]).ravel()

    # nodal helpers

    def velocity_dofs(self, nodes):
        nodes = np.asarray(nodes, dtype=np.int64)
        return np.concatenate([nodes, nodes + self.n_nodes])

    def split(self, u):
        return u[: self.n_nodes], u[self.n_nodes:]

    def interpolate(self, fun):
        """Nodal interpolant of ``fun(x, y) -> (ux, uy)``."""
        x, y = self.node_xy[:, 0], self.node_xy[:, 1]
        ux, uy = fun(x, y)
        return np.concatenate([np.broadcast_to(ux, x.shape), np.broadcast_to(uy, x.shape)]).astype(float)

    def interpolate_pressure(self, fun):
        return np.broadcast_to(fun(self.vertices[:, 0], self.vertices[:, 1]), (self.n_p,)).astype(float)

    def scatter_vector(self, local):
        """Sum element vectors ``(m, 2, 6)`` into a velocity vector."""
        return np.bincount(self._vec_rows, weights=local.ravel(), minlength=self.n_u)

    def eval_quad(self, u):
        """Values ``(m, nq, 2)`` and gradients ``(m, nq, 2, 2)`` (``[a, b] = d_b u_a``)."""
        wl = np.stack(self.split(u))[:, self.cell_nodes]          # (2, m, 6)
        val = np.einsum("qi,ami->mqa", self.phi, wl)
        grad = np.einsum("mqib,ami->mqab", self.dphi, wl)
        return val, grad

    def eval_quad_pressure(self, p):
        return np.einsum("qi,mi->mq", self.psi, p[self.triangles])

    def load_vector(self, force):
        """Assemble ``(f, v)`` for ``force(x, y) -> (fx, fy)`` sampled at quadrature points."""
        fx, fy = force(self.quad_xy[..., 0], self.quad_xy[..., 1])
        f = np.stack([np.broadcast_to(fx, self.wts.shape), np.broadcast_to(fy, self.wts.shape)], axis=1)
        local = np.einsum("mq,maq,qi->mai", self.wts, f, self.phi)
        return self.scatter_vector(local)

    def velocity_norm(self, u):
        return float(np.sqrt(max(u @ (self.M @ u), 0.0)))

    def pressure_norm(self, p):
        return float(np.sqrt(max(p @ (self.Mp @ p), 0.0)))

    def h1_seminorm(self, u):
        return float(np.sqrt(max(u @ (self.K @ u), 0.0)))
