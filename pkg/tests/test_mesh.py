import numpy as np
import pytest
from hypothesis import given, strategies as st

from ddrom.errors import DisconnectedInterface, InvalidResolution
from ddrom.mesh import (
    STEP_INTERFACE_X,
    BoundaryTag,
    Mesh,
    extract_interface,
    generate_cavity_mesh,
    generate_step_mesh,
)

h_values = st.sampled_from([2.0, 1.0, 0.75, 0.5, 0.3])
cavity_h = st.sampled_from([0.5, 0.25, 0.2, 0.125, 0.1])


def edge_owners(mesh):
    owners = {}
    for k, t in enumerate(mesh.triangles):
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            owners.setdefault((min(a, b), max(a, b)), []).append(k)
    return owners


def test_step_area():
    m = generate_step_mesh(0.5)
    assert m.area() == pytest.approx(82.0, abs=1e-10)
    assert m.area(1) == pytest.approx(STEP_INTERFACE_X * 3 + (STEP_INTERFACE_X - 4) * 2, rel=1e-12)
    assert m.area(2) == pytest.approx((18 - STEP_INTERFACE_X) * 5, rel=1e-12)


def test_step_interface_endpoints():
    tr = extract_interface(generate_step_mesh(0.5))
    assert np.allclose(tr.points[0], [STEP_INTERFACE_X, 0.0])
    assert np.allclose(tr.points[-1], [STEP_INTERFACE_X, 5.0])
    assert tr.length == pytest.approx(5.0)


def test_step_refinement_adds_vertices():
    assert generate_step_mesh(0.5).n_vertices > generate_step_mesh(1.0).n_vertices


def test_step_tags():
    m = generate_step_mesh(1.0)
    assert m.tags() == [BoundaryTag.INLET, BoundaryTag.WALL, BoundaryTag.OUTLET, BoundaryTag.INTERFACE]
    inlet = np.array(m.edges_with_tag(BoundaryTag.INLET))
    assert np.allclose(m.vertices[inlet.ravel(), 0], 0.0)
    assert m.vertices[inlet.ravel(), 1].min() == pytest.approx(2.0)


def test_cavity_tags_and_areas():
    m = generate_cavity_mesh(0.1)
    assert m.tags() == [BoundaryTag.WALL, BoundaryTag.LID, BoundaryTag.INTERFACE]
    assert m.area() == pytest.approx(1.0)
    assert m.area(1) == pytest.approx(0.5)
    assert m.area(2) == pytest.approx(0.5)
    assert extract_interface(m).length == pytest.approx(1.0)


def test_cavity_interface_vertices_shared():
    m = generate_cavity_mesh(0.1)
    tr = extract_interface(m)
    s1, s2 = m.submesh(1), m.submesh(2)
    assert set(tr.vertex_ids) <= set(s1.vertex_ids)
    assert set(tr.vertex_ids) <= set(s2.vertex_ids)
    assert len(tr.vertex_ids) == 11


def test_cavity_structured_interface():
    tr = extract_interface(generate_cavity_mesh(0.25))
    assert np.allclose(tr.points, [[0, 0.5], [0.25, 0.5], [0.5, 0.5], [0.75, 0.5], [1, 0.5]])


def test_two_triangle_interface():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    tris = np.array([[0, 1, 2], [1, 3, 2]])
    edges = {(0, 1): BoundaryTag.WALL, (0, 2): BoundaryTag.WALL, (1, 3): BoundaryTag.WALL,
             (2, 3): BoundaryTag.WALL, (1, 2): BoundaryTag.INTERFACE}
    tr = extract_interface(Mesh(verts, tris, np.array([1, 2]), edges))
    assert len(tr.vertex_ids) == 2
    assert tr.length == pytest.approx(np.sqrt(2))


def test_disconnected_interface():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    m = Mesh(verts, np.array([[0, 1, 2]]), np.array([1]), {(0, 1): BoundaryTag.WALL})
    with pytest.raises(DisconnectedInterface):
        extract_interface(m)


@pytest.mark.parametrize("gen,h", [(generate_step_mesh, 2.5), (generate_step_mesh, 0.0),
                                   (generate_cavity_mesh, 0.6), (generate_cavity_mesh, -1.0)])
def test_invalid_resolution(gen, h):
    with pytest.raises(InvalidResolution):
        gen(h)


def check_mesh_invariants(m):
    assert np.all(m.triangle_areas() > 0)
    owners = edge_owners(m)
    single = {e for e, ks in owners.items() if len(ks) == 1}
    tagged_outer = {e for e, t in m.boundary_edges.items() if t != BoundaryTag.INTERFACE}
    assert single == tagged_outer
    for e, t in m.boundary_edges.items():
        if t == BoundaryTag.INTERFACE:
            ks = owners[e]
            assert len(ks) == 2 and sorted(m.subdomain_of[ks]) == [1, 2]
    for e, ks in owners.items():
        if len(ks) == 2 and m.subdomain_of[ks[0]] != m.subdomain_of[ks[1]]:
            assert m.boundary_edges[e] == BoundaryTag.INTERFACE
    tr = extract_interface(m)
    assert np.all(np.diff(tr.arclength) > 0)


@given(h=h_values)
def test_step_mesh_invariants(h):
    m = generate_step_mesh(h)
    check_mesh_invariants(m)
    assert m.area(1) + m.area(2) == pytest.approx(82.0, rel=1e-10)
    assert extract_interface(m).length == pytest.approx(5.0)


@given(h=cavity_h)
def test_cavity_mesh_invariants(h):
    m = generate_cavity_mesh(h)
    check_mesh_invariants(m)
    assert m.area(1) == pytest.approx(0.5, rel=1e-10)
    assert m.area(2) == pytest.approx(0.5, rel=1e-10)


def test_deterministic_numbering():
    a, b = generate_step_mesh(0.5), generate_step_mesh(0.5)
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.triangles, b.triangles)
