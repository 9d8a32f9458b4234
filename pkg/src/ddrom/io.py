"""File formats: legacy VTK, CSV tables, the versioned basis container and run manifests.

All text writers use fixed float formatting and ``\\n`` line endings so that
identical inputs give byte-identical files.
"""
import csv
import hashlib
import json
import os

import numpy as np

from .errors import MissingArtifacts
from .rom.operators import operators_from_arrays, operators_to_arrays
from .rom.pod import PodBasis

CONTAINER_VERSION = 1
SPECTRA_COLUMNS = ("component", "k", "eigenvalue")
ENERGY_COLUMNS = ("component", "n", "retained_energy")
COEFFICIENT_COLUMNS = ("dof", "x", "y", "value")
MESH_SUMMARY_COLUMNS = ("quantity", "value")


def _fmt(v):
    return repr(float(v))


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


# --- VTK -------------------------------------------------------------------

def write_vtk(path, points, triangles, point_data=None, cell_data=None, title="ddrom"):
    """Legacy ASCII ``UNSTRUCTURED_GRID`` of linear triangles.

    ``point_data`` / ``cell_data`` map names to arrays of shape ``(n,)``
    (scalars) or ``(n, 2)`` (vectors, padded with a zero z-component).
    """
    points = np.asarray(points, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(points)} double"]
    lines += [f"{x!r} {y!r} 0.0" for x, y in points.tolist()]
    lines.append(f"CELLS {len(triangles)} {4 * len(triangles)}")
    lines += [f"3 {a} {b} {c}" for a, b, c in triangles.tolist()]
    lines.append(f"CELL_TYPES {len(triangles)}")
    lines += ["5"] * len(triangles)
    for kind, data, n in (("POINT_DATA", point_data, len(points)), ("CELL_DATA", cell_data, len(triangles))):
        if not data:
            continue
        lines.append(f"{kind} {n}")
        for name, arr in data.items():
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 1:
                lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
                lines += [repr(v) for v in arr.tolist()]
            else:
                lines.append(f"VECTORS {name} double")
                lines += [f"{a!r} {b!r} 0.0" for a, b in arr.tolist()]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_vtk_points(path):
    """Point coordinates and triangles of a file written by :func:`write_vtk`."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    k = next(i for i, l in enumerate(lines) if l.startswith("POINTS"))
    n = int(lines[k].split()[1])
    pts = np.array([[float(v) for v in l.split()[:2]] for l in lines[k + 1:k + 1 + n]])
    c = k + 1 + n
    m = int(lines[c].split()[1])
    tri = np.array([[int(v) for v in l.split()[1:]] for l in lines[c + 1:c + 1 + m]], dtype=np.int64)
    return pts, tri


def write_mesh_vtk(path, mesh):
    return write_vtk(path, mesh.vertices, mesh.triangles, cell_data={"subdomain": mesh.subdomain_of},
                     title=mesh.name)


def write_fields_vtk(path, space, u=None, p=None, extra=None):
    """Vertex values of P2 velocity / P1 pressure fields on the space's triangles."""
    nv = space.n_vertices
    data = {}
    if u is not None:
        uu = np.asarray(u).reshape(2, space.n_nodes)
        data["velocity"] = uu[:, :nv].T
    if p is not None:
        data["pressure"] = np.asarray(p)
    for name, arr in (extra or {}).items():
        arr = np.asarray(arr)
        data[name] = arr.reshape(2, space.n_nodes)[:, :nv].T if arr.size == space.n_u else arr
    return write_vtk(path, space.node_xy[:nv], space.cell_nodes[:, :3], point_data=data)


def write_coefficients_csv(path, space, values, kind="velocity"):
    """Coefficient vector as rows (dof, x, y, value)."""
    values = np.asarray(values, dtype=float)
    if kind == "velocity":
        xy = np.vstack([space.node_xy, space.node_xy])
    else:
        xy = space.node_xy[: space.n_vertices]
    if len(xy) != len(values):
        raise ValueError(f"{len(values)} coefficients for {len(xy)} {kind} dofs")
    rows = [(k, _fmt(x), _fmt(y), _fmt(v)) for k, ((x, y), v) in enumerate(zip(xy.tolist(), values.tolist()))]
    return write_csv(path, COEFFICIENT_COLUMNS, rows)


def write_mesh_summary(path, mesh, trace):
    rows = [("vertices", mesh.n_vertices), ("triangles", len(mesh.triangles)),
            ("area", _fmt(mesh.area())), ("area_1", _fmt(mesh.area(1))), ("area_2", _fmt(mesh.area(2))),
            ("interface_vertices", len(trace.vertex_ids)), ("interface_length", _fmt(trace.length))]
    return write_csv(path, MESH_SUMMARY_COLUMNS, rows)


# --- POD sidecars ----------------------------------------------------------

def write_spectra(path, basis):
    """First ``n_max`` eigenvalues of every component (zero-padded when fewer snapshots)."""
    rows = []
    for comp in sorted(basis.eigenvalues):
        lam = np.zeros(basis.n_max)
        vals = basis.eigenvalues[comp][: basis.n_max]
        lam[: len(vals)] = vals
        rows += [(comp, k + 1, _fmt(v)) for k, v in enumerate(lam)]
    return write_csv(path, SPECTRA_COLUMNS, rows)


def write_retained_energy(path, basis):
    rows = []
    for comp in sorted(basis.eigenvalues):
        rows += [(comp, n + 1, _fmt(e)) for n, e in enumerate(basis.retained_energy(comp))]
    return write_csv(path, ENERGY_COLUMNS, rows)


# --- container -------------------------------------------------------------

def save_container(path, basis, ops, meta):
    """Basis, reduced operators and JSON metadata in one ``.npz`` file."""
    arr = {"version": np.array(CONTAINER_VERSION), "meta": np.array(json.dumps(meta, sort_keys=True)),
           "n_max": np.array(basis.n_max)}
    for comp, Phi in basis.modes.items():
        arr[f"mode_{comp}"] = Phi
        arr[f"eig_{comp}"] = basis.eigenvalues[comp]
    for k, v in operators_to_arrays(ops).items():
        arr[f"op_{k}"] = v
    np.savez(path, **arr)
    return path


def load_container(path):
    """Returns ``(basis, ops, meta)``.

    Raises
    ------
    MissingArtifacts
        If the file is absent or has an unsupported version.
    """
    if not os.path.exists(path):
        raise MissingArtifacts(f"basis container {path} not found; run the offline stage first")
    with np.load(path, allow_pickle=False) as f:
        if "version" not in f or int(f["version"]) != CONTAINER_VERSION:
            raise MissingArtifacts(f"{path} is not a version-{CONTAINER_VERSION} basis container")
        meta = json.loads(str(f["meta"]))
        modes = {k[5:]: f[k] for k in f.files if k.startswith("mode_")}
        eigs = {k[4:]: f[k] for k in f.files if k.startswith("eig_")}
        ops = operators_from_arrays({k[3:]: f[k] for k in f.files if k.startswith("op_")})
        basis = PodBasis(modes, eigs, int(f["n_max"]))
    return basis, ops, meta


# --- manifest --------------------------------------------------------------

def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(cfg):
    """Stable digest of a JSON-serialisable configuration."""
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()[:16]


def write_manifest(path, config, files, timings=None, failures=None, status="ok", results=None):
    """Manifest listing every emitted file with its checksum."""
    base = os.path.dirname(os.path.abspath(path))
    entries = {os.path.relpath(os.path.abspath(f), base): sha256(f) for f in sorted(set(files)) if os.path.exists(f)}
    doc = {"status": status, "config_hash": config_hash(config), "config": config,
           "container_version": CONTAINER_VERSION, "files": entries,
           "timings": timings or {}, "failures": failures or [], "results": results or {}}
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return path


def read_manifest(path):
    if not os.path.exists(path):
        raise MissingArtifacts(f"manifest {path} not found")
    with open(path) as fh:
        return json.load(fh)
