import json

import numpy as np
import pytest

from ddrom import io
from ddrom.errors import MissingArtifacts
from ddrom.mesh import extract_interface, generate_cavity_mesh
from ddrom.rom.pod import PodBasis


def test_vtk_roundtrip(tmp_path, cavity_coarse):
    mesh = generate_cavity_mesh(0.25)
    path = tmp_path / "mesh.vtk"
    io.write_mesh_vtk(path, mesh)
    pts, tri = io.read_vtk_points(path)
    assert np.array_equal(pts, mesh.vertices) and np.array_equal(tri, mesh.triangles)
    text = path.read_text()
    assert text.startswith("# vtk DataFile Version 3.0\n")
    assert "CELL_TYPES" in text and "SCALARS subdomain double 1" in text


def test_field_vtk_vectors(tmp_path, cavity_coarse):
    s = cavity_coarse.spaces[1]
    u = s.interpolate(lambda x, y: (x, -y))
    p = np.arange(s.n_p, dtype=float)
    path = io.write_fields_vtk(tmp_path / "f.vtk", s, u, p)
    lines = open(path).read().splitlines()
    k = lines.index("VECTORS velocity double")
    x0, y0 = s.node_xy[0]
    assert [float(v) for v in lines[k + 1].split()] == [x0, -y0, 0.0]
    assert f"POINT_DATA {s.n_vertices}" in lines


def test_coefficients_csv(tmp_path, cavity_coarse):
    s = cavity_coarse.spaces[0]
    u = np.arange(s.n_u, dtype=float)
    io.write_coefficients_csv(tmp_path / "u.csv", s, u)
    header, rows = io.read_csv(tmp_path / "u.csv")
    assert tuple(header) == io.COEFFICIENT_COLUMNS and len(rows) == s.n_u
    assert float(rows[s.n_nodes][1]) == s.node_xy[0, 0] and float(rows[-1][3]) == s.n_u - 1
    with pytest.raises(ValueError):
        io.write_coefficients_csv(tmp_path / "p.csv", s, u, kind="pressure")


def test_mesh_summary(tmp_path):
    mesh = generate_cavity_mesh(0.1)
    io.write_mesh_summary(tmp_path / "m.csv", mesh, extract_interface(mesh))
    _, rows = io.read_csv(tmp_path / "m.csv")
    d = dict(rows)
    assert float(d["area"]) == pytest.approx(1.0) and d["interface_vertices"] == "11"


def test_spectra_and_energy(tmp_path):
    basis = PodBasis({"u1": np.eye(3)[:, :2]}, {"u1": np.array([4.0, 1.0, 0.0])}, 5)
    io.write_spectra(tmp_path / "s.csv", basis)
    header, rows = io.read_csv(tmp_path / "s.csv")
    assert tuple(header) == io.SPECTRA_COLUMNS and len(rows) == 5
    assert [float(r[2]) for r in rows] == [4.0, 1.0, 0.0, 0.0, 0.0]
    io.write_retained_energy(tmp_path / "e.csv", basis)
    _, rows = io.read_csv(tmp_path / "e.csv")
    assert [float(r[2]) for r in rows] == [0.8, 1.0, 1.0]


def test_container_version_and_missing(tmp_path):
    with pytest.raises(MissingArtifacts):
        io.load_container(tmp_path / "absent.npz")
    np.savez(tmp_path / "old.npz", version=np.array(0))
    with pytest.raises(MissingArtifacts):
        io.load_container(tmp_path / "old.npz")


def test_manifest(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("x\n1\n")
    path = io.write_manifest(tmp_path / "manifest.json", {"b": 1, "a": 2}, [f, tmp_path / "missing"],
                             failures=[{"nu": 1}], status="ok")
    doc = io.read_manifest(path)
    assert doc["files"] == {"a.csv": io.sha256(f)}
    assert doc["config_hash"] == io.config_hash({"a": 2, "b": 1})
    assert doc["failures"] == [{"nu": 1}] and doc["container_version"] == io.CONTAINER_VERSION
    with pytest.raises(MissingArtifacts):
        io.read_manifest(tmp_path / "nope.json")
    assert json.loads(open(path).read())["status"] == "ok"
