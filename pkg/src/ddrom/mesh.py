"""Structured triangulations of the backward-facing step and the lid-driven cavity.

A mesh covers the whole domain; every triangle carries a subdomain label
(1 or 2) and the straight interface between the labels is a grid line, so
the split is conforming by construction.
"""
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DisconnectedInterface, InvalidResolution

STEP_INTERFACE_X = 26.0 / 3.0


class BoundaryTag(enum.IntEnum):
    INLET = 1
    WALL = 2
    OUTLET = 3
    LID = 4
    INTERFACE = 5


@dataclass(frozen=True)
class Mesh:
    """Triangulated 2D domain with subdomain labels and tagged boundary edges.

    ``boundary_edges`` maps sorted vertex pairs to a tag. It contains the
    outer boundary and the interface edges (tagged ``INTERFACE``), which are
    interior to the whole domain but boundary for each subdomain.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    subdomain_of: np.ndarray
    boundary_edges: dict
    name: str = "mesh"

    def __post_init__(self):
        for arr in (self.vertices, self.triangles, self.subdomain_of):
            arr.setflags(write=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    def triangle_areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def area(self, subdomain=None):
        a = self.triangle_areas()
        if subdomain is not None:
            a = a[self.subdomain_of == subdomain]
        return float(a.sum())

    def edges_with_tag(self, tag):
        return sorted(e for e, t in self.boundary_edges.items() if t == tag)

    def tags(self):
        return sorted(set(self.boundary_edges.values()))

    def submesh(self, subdomain):
        """Restriction to one subdomain, with local vertex numbering.

        ``vertex_ids`` maps local vertices to the parent numbering.
        """
        tri = self.triangles[self.subdomain_of == subdomain]
        ids = np.unique(tri)
        local = -np.ones(self.n_vertices, dtype=np.int64)
        local[ids] = np.arange(len(ids))
        mine = set()
        for t in tri:
            for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                mine.add((min(a, b), max(a, b)))
        edges = {}
        for (a, b), tag in self.boundary_edges.items():
            if (a, b) in mine:
                la, lb = local[a], local[b]
                edges[(min(la, lb), max(la, lb))] = tag
        return SubMesh(self.vertices[ids].copy(), local[tri], edges, ids)


@dataclass
class SubMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: dict
    vertex_ids: np.ndarray


@dataclass(frozen=True)
class InterfaceTrace:
    """Ordered interface polyline shared by the two subdomains."""

    vertex_ids: np.ndarray
    points: np.ndarray
    arclength: np.ndarray
    edges: list = field(default_factory=list)

    @property
    def length(self):
        return float(self.arclength[-1])


def _subdivide(breaks, h):
    """Grid coordinates with spacing at most ``h`` hitting every breakpoint."""
    pts = [breaks[0]]
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = max(1, math.ceil((b - a) / h - 1e-9))
        pts.extend(a + (b - a) * np.arange(1, n + 1) / n)
    out = np.array(pts, dtype=float)
    out[-1] = breaks[-1]
    return out


def _block_mesh(xs, ys, inside, subdomain, split_on, tag_of, name):
    nx, ny = len(xs) - 1, len(ys) - 1
    xc = 0.5 * (xs[:-1] + xs[1:])
    yc = 0.5 * (ys[:-1] + ys[1:])
    cell_in = np.array([[inside(xc[i], yc[j]) for i in range(nx)] for j in range(ny)])

    # vertex (i, j) is used if any adjacent cell is in; numbering is row-major in j
    used = np.zeros((ny + 1, nx + 1), dtype=bool)
    for j in range(ny):
        for i in range(nx):
            if cell_in[j, i]:
                used[j:j + 2, i:i + 2] = True
    vid = -np.ones((ny + 1, nx + 1), dtype=np.int64)
    vid[used] = np.arange(used.sum())
    jj, ii = np.nonzero(used)
    verts = np.column_stack([xs[ii], ys[jj]])

    def cell(j, i):
        return 0 <= j < ny and 0 <= i < nx and cell_in[j, i]

    # vertices on the boundary of their subdomain (outer boundary or interface line)
    on_bnd = np.zeros((ny + 1, nx + 1), dtype=bool)
    for j in range(ny + 1):
        for i in range(nx + 1):
            if not used[j, i]:
                continue
            around = [cell(j - 1, i - 1), cell(j - 1, i), cell(j, i - 1), cell(j, i)]
            on_bnd[j, i] = not all(around) or split_on(xs[i], ys[j])

    tris, sub = [], []
    for j in range(ny):
        for i in range(nx):
            if not cell_in[j, i]:
                continue
            v00, v10, v01, v11 = (j, i), (j, i + 1), (j + 1, i), (j + 1, i + 1)
            main = [(v00, v10, v11), (v00, v11, v01)]
            anti = [(v00, v10, v01), (v10, v11, v01)]

            def bad(split):
                return any(all(on_bnd[v] for v in t) for t in split)

            split = anti if bad(main) and not bad(anti) else main
            label = subdomain(xc[i], yc[j])
            for t in split:
                tris.append([vid[v] for v in t])
                sub.append(label)
    tris = np.array(tris, dtype=np.int64)
    sub = np.array(sub, dtype=np.int64)

    owners = {}
    for k, t in enumerate(tris):
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            owners.setdefault((min(a, b), max(a, b)), []).append(k)
    bedges = {}
    for e, ks in owners.items():
        if len(ks) == 1:
            mid = 0.5 * (verts[e[0]] + verts[e[1]])
            bedges[e] = tag_of(mid[0], mid[1])
        elif sub[ks[0]] != sub[ks[1]]:
            bedges[e] = BoundaryTag.INTERFACE
    return Mesh(verts, tris, sub, bedges, name)


def _check_h(h, limit, what):
    if not (h > 0) or not math.isfinite(h):
        raise InvalidResolution(f"mesh size must be positive, got {h}")
    if h > limit:
        raise InvalidResolution(f"h={h} exceeds the smallest feature of the {what} ({limit})")


def generate_step_mesh(h):
    """Backward-facing step: inlet x=0, y in [2, 5]; 18 long on top, 14 below the step.

    Omega_1 is x < 26/3, Omega_2 is x > 26/3.
    """
    _check_h(h, 2.0, "step")
    xs = _subdivide([0.0, 4.0, STEP_INTERFACE_X, 18.0], h)
    ys = _subdivide([0.0, 2.0, 5.0], h)
    eps = 1e-9

    def inside(x, y):
        return x > 4.0 or y > 2.0

    def tag_of(x, y):
        if abs(x) < eps:
            return BoundaryTag.INLET
        if abs(x - 18.0) < eps:
            return BoundaryTag.OUTLET
        return BoundaryTag.WALL

    return _block_mesh(
        xs, ys, inside,
        subdomain=lambda x, y: 1 if x < STEP_INTERFACE_X else 2,
        split_on=lambda x, y: abs(x - STEP_INTERFACE_X) < eps,
        tag_of=tag_of, name="step",
    )


def generate_cavity_mesh(h):
    """Unit square; Omega_1 is the lower half, Omega_2 the upper half, the lid is y=1."""
    _check_h(h, 0.5, "cavity")
    xs = _subdivide([0.0, 1.0], h)
    ys = _subdivide([0.0, 0.5, 1.0], h)
    eps = 1e-9

    def tag_of(x, y):
        return BoundaryTag.LID if abs(y - 1.0) < eps else BoundaryTag.WALL

    return _block_mesh(
        xs, ys, lambda x, y: True,
        subdomain=lambda x, y: 1 if y < 0.5 else 2,
        split_on=lambda x, y: abs(y - 0.5) < eps,
        tag_of=tag_of, name="cavity",
    )


def extract_interface(mesh):
    """Order the interface edges into a single path starting at the lexicographically smallest end."""
    edges = mesh.edges_with_tag(BoundaryTag.INTERFACE)
    if not edges:
        raise DisconnectedInterface("mesh has no interface edges")
    adj = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    ends = [v for v, nb in adj.items() if len(nb) == 1]
    if len(ends) != 2 or any(len(nb) > 2 for nb in adj.values()):
        raise DisconnectedInterface("interface is not a single open path")
    start = min(ends, key=lambda v: (mesh.vertices[v][0], mesh.vertices[v][1]))
    path, prev = [start], None
    while True:
        nxt = [v for v in adj[path[-1]] if v != prev]
        if not nxt:
            break
        prev = path[-1]
        path.append(nxt[0])
    if len(path) != len(adj):
        raise DisconnectedInterface("interface has more than one component")
    ids = np.array(path, dtype=np.int64)
    pts = mesh.vertices[ids]
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    pair_edges = [(int(a), int(b)) for a, b in zip(ids[:-1], ids[1:])]
    return InterfaceTrace(ids, pts, s, pair_edges)
