import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from hypothesis import given, strategies as st

from ddrom.benchmarks import zero_profile
from ddrom.ddsolver import CoupledProblem
from ddrom.errors import DimensionMismatch, TraceMismatch
from ddrom.fem import (
    Interface,
    SubdomainProblem,
    TaylorHoodSpace,
    assemble_convection,
    assemble_diffusion,
    assemble_divergence,
    assemble_interface_load,
    compute_lifting,
    compute_supremizer,
    solve_adjoint,
    solve_monolithic,
    solve_sensitivity,
    solve_state,
)
from ddrom.fem.assembly import convection_vector
from ddrom.fem.quadrature import gauss_segment, triangle_degree4, triangle_degree5
from ddrom.mesh import BoundaryTag, generate_cavity_mesh, generate_step_mesh


def duffy_rule(n=8):
    """Collapsed Gauss rule on the reference triangle, exact to degree 2n-2 (test oracle)."""
    x, w = gauss_segment(n)
    pts, wts = [], []
    for xi, wi in zip(x, w):
        for yj, wj in zip(x, w):
            s, t = xi, yj * (1 - xi)
            pts.append((1 - s - t, s, t))
            wts.append(2 * wi * wj * (1 - xi))
    return np.array(pts), np.array(wts)


def lower_cavity_space(h=0.25, quadrature=triangle_degree5):
    s = generate_cavity_mesh(h).submesh(1)
    return TaylorHoodSpace(s.vertices, s.triangles, s.boundary_edges, s.vertex_ids, quadrature)


@pytest.fixture(scope="module")
def cav():
    return CoupledProblem("cavity", 0.25, nu=0.5, ubar=1.0)


@pytest.fixture(scope="module")
def step():
    return CoupledProblem("step", 1.0, nu=1.0, ubar=1.0)


# quadrature -------------------------------------------------------------------

@pytest.mark.parametrize("rule,deg", [(triangle_degree4, 4), (triangle_degree5, 5)])
def test_triangle_rule_exactness(rule, deg):
    pts, w = rule()
    ref, rw = duffy_rule(10)
    for i in range(deg + 1):
        for j in range(deg + 1 - i):
            f = lambda b: b[:, 1] ** i * b[:, 2] ** j
            assert w @ f(pts) == pytest.approx(rw @ f(ref), abs=1e-14)


def test_assembly_matches_high_order_oracle(rng):
    sp5 = lower_cavity_space(0.25)
    sp8 = lower_cavity_space(0.25, lambda: duffy_rule(6))
    for name in ("K", "M", "B", "Mp"):
        d = getattr(sp5, name) - getattr(sp8, name)
        assert abs(d).max() <= 1e-12
    w = rng.standard_normal(sp5.n_u)
    for mode in ("full", "linearized-first"):
        d = assemble_convection(sp5, w, mode) - assemble_convection(sp8, w, mode)
        assert abs(d).max() <= 1e-12


# diffusion / divergence ----------------------------------------------------------

def test_diffusion_linear_shear():
    s = lower_cavity_space(0.25)
    u = s.interpolate(lambda x, y: (y, 0 * x))
    assert u @ (assemble_diffusion(s, nu=1.0) @ u) == pytest.approx(0.5, abs=1e-12)


def test_diffusion_constant_and_symmetric():
    s = lower_cavity_space(0.25)
    K = assemble_diffusion(s)
    u = s.interpolate(lambda x, y: (1.0 + 0 * x, -2.0 + 0 * x))
    assert abs(u @ (K @ u)) < 1e-12
    assert abs(K - K.T).max() <= 1e-15


def test_divergence_examples():
    s = lower_cavity_space(0.25)
    B = assemble_divergence(s)
    one = np.ones(s.n_p)
    const = s.interpolate(lambda x, y: (1.0 + 0 * x, 3.0 + 0 * x))
    assert np.abs(B @ const).max() < 1e-13
    vx = s.interpolate(lambda x, y: (x, 0 * x))
    assert one @ (B @ vx) == pytest.approx(-0.5, abs=1e-12)
    sol = s.interpolate(lambda x, y: (x, -y))
    assert np.abs(B @ sol).max() < 1e-13


# convection ---------------------------------------------------------------------

def test_convection_zero_field():
    s = lower_cavity_space(0.25)
    for mode in ("full", "linearized-first", "linearized-second"):
        assert abs(assemble_convection(s, np.zeros(s.n_u), mode)).max() == 0.0


def test_convection_exact_integral():
    s = lower_cavity_space(0.25)
    w = s.interpolate(lambda x, y: (1.0 + 0 * x, 0 * x))
    u = s.interpolate(lambda x, y: (x, 0 * x))
    # c(w, u, v) = int (w . grad u) . v = int x over [0, 1] x [0, 0.5]
    assert u @ (assemble_convection(s, w) @ u) == pytest.approx(0.25, abs=1e-12)


def test_convection_jacobian_consistency(rng):
    s = lower_cavity_space(0.25)
    w = rng.standard_normal(s.n_u)
    d = rng.standard_normal(s.n_u)
    eps = 1e-6
    fd = (convection_vector(s, w + eps * d) - convection_vector(s, w - eps * d)) / (2 * eps)
    lin = assemble_convection(s, w, "linearized-first") @ d + assemble_convection(s, w, "linearized-second") @ d
    assert np.abs(fd - lin).max() <= 1e-8 * max(1.0, np.abs(lin).max())
    assert np.allclose(assemble_convection(s, w) @ w, convection_vector(s, w), atol=1e-12)


def test_convection_dimension_mismatch():
    s = lower_cavity_space(0.5)
    with pytest.raises(DimensionMismatch):
        assemble_convection(s, np.zeros(s.n_u + 1))


def test_convection_skew_identity(rng):
    s = lower_cavity_space(0.25)
    bnd = np.unique(np.concatenate(list(s.boundary_nodes.values())))
    w = rng.standard_normal(s.n_u)
    v = rng.standard_normal(s.n_u)
    v[s.velocity_dofs(bnd)] = 0.0
    cwvv = v @ (assemble_convection(s, w) @ v)
    wv, wg = s.eval_quad(w)
    vv, _ = s.eval_quad(v)
    div = wg[..., 0, 0] + wg[..., 1, 1]
    other = 0.5 * np.sum(s.wts * div * np.sum(vv ** 2, axis=-1))
    assert abs(cwvv + other) <= 1e-10 * max(1.0, abs(cwvv))


# interface load -----------------------------------------------------------------

def test_interface_load_zero(cav):
    p = cav.problems[0]
    assert np.all(assemble_interface_load(p, np.zeros(cav.n_control)) == 0.0)


def test_interface_load_hat_integrals(cav):
    itf = cav.interface
    g = np.concatenate([np.ones(itf.n_trace), np.zeros(itf.n_trace)])
    p = cav.problems[0]
    f = assemble_interface_load(p, g)
    # Simpson on each interface edge integrates the quadratic hats exactly
    R = itf.restriction(1)
    nodes = R.indices[: itf.n_trace]
    L = np.diff(itf.trace.arclength)
    expect = np.zeros(itf.n_trace)
    for e, le in enumerate(L):
        expect[2 * e] += le / 6
        expect[2 * e + 1] += 4 * le / 6
        expect[2 * e + 2] += le / 6
    assert np.allclose(f[nodes], expect, atol=1e-14)
    supp = np.flatnonzero(f)
    assert set(supp) <= set(R.indices)


def test_interface_load_sign_flip(cav, rng):
    g = rng.standard_normal(cav.n_control)
    f1 = assemble_interface_load(cav.problems[0], g)
    f2 = assemble_interface_load(cav.problems[1], g)
    R1, R2 = cav.interface.restriction(1), cav.interface.restriction(2)
    assert np.allclose(R2 @ f2, -(R1 @ f1), atol=1e-14)


def test_interface_trace_mismatch(cav):
    s = cav.spaces[0]
    moved = TaylorHoodSpace(s.vertices + np.array([0.0, 1e-3]), s.triangles, s.boundary_edges, s.vertex_ids)
    with pytest.raises(TraceMismatch):
        Interface(cav.trace, [moved, cav.spaces[1]])


def test_interface_mass_integrates_length(cav):
    itf = cav.interface
    one = np.ones(itf.n_trace)
    assert one @ (itf.M_gamma @ one) == pytest.approx(1.0, abs=1e-14)


# subdomain solves -------------------------------------------------------------

def test_lifting_zero_data():
    s = lower_cavity_space(0.25)
    prob = SubdomainProblem(s, 1, 1.0, ((BoundaryTag.WALL, zero_profile),))
    assert np.all(compute_lifting(prob) == 0.0)


def test_lifting_cavity_lid(cav):
    prob = cav.problems[1]
    lid = cav.spaces[1].velocity_dofs(cav.spaces[1].boundary_nodes[BoundaryTag.LID])
    l = compute_lifting(prob)
    assert np.abs(l[lid]).max() == pytest.approx(1.0)
    fixed = prob.dirichlet_dofs
    assert np.array_equal(l[fixed], prob.unit_dirichlet[fixed])


def test_lifting_step_inlet_midpoint(step):
    s = step.spaces[0]
    l = compute_lifting(step.problems[0])
    k = int(np.argmin(np.hypot(s.node_xy[:, 0], s.node_xy[:, 1] - 3.5)))
    assert np.allclose(s.node_xy[k], [0.0, 3.5])
    assert l[k] == pytest.approx(1.0, abs=1e-14)
    assert l[k + s.n_nodes] == pytest.approx(0.0, abs=1e-14)


def test_state_zero_solution(cav):
    prob = cav.problems[0]           # lower cavity half: walls only
    st = solve_state(prob, np.zeros(cav.n_control))
    assert np.abs(st.u).max() == 0.0 and np.abs(st.p).max() == 0.0


def _direct_stokes(prob, g):
    """Independent saddle-point solve with explicit Dirichlet elimination (oracle)."""
    s = prob.space
    A = sp.bmat([[prob.nu * s.K, s.B.T], [s.B, None]], format="csr")
    b = np.concatenate([prob.load(g), np.zeros(s.n_p)])
    x = np.zeros(s.n)
    fixed = np.flatnonzero(prob.fixed)
    x[fixed[fixed < s.n_u]] = prob.dirichlet_values[fixed[fixed < s.n_u]]
    free = np.flatnonzero(~prob.fixed)
    rhs = b[free] - A[free][:, fixed] @ x[fixed]
    x[free] = spla.spsolve(A[free][:, free].tocsc(), rhs)
    return x


def test_state_stokes_limit(step, rng):
    prob = step.problems[1]
    g = 0.1 * rng.standard_normal(step.n_control)
    st = solve_state(prob, g, convection=False)
    assert np.abs(st.x - _direct_stokes(prob, g)).max() <= 1e-10


def test_state_residual_and_dirichlet(step, rng):
    step.set_parameters(1.0, 1.0)
    prob = step.problems[0]
    g = 0.1 * rng.standard_normal(step.n_control)
    st = solve_state(prob, g)
    rhs = prob.load(g)
    r = prob.residual(st.x, rhs)
    assert np.abs(r[prob.free]).max() <= 1e-10 * (1 + np.abs(rhs).max())
    fixed = prob.dirichlet_dofs
    assert np.array_equal(st.u[fixed], prob.dirichlet_values[fixed])
    assert np.abs(prob.space.B @ st.u).max() <= 1e-10


def test_state_functional_order_of_magnitude():
    cp = CoupledProblem("step", 0.5, nu=1.0, ubar=1.0)
    states = cp.solve_states(np.zeros(cp.n_control))
    J = 0.5 * cp.interface.inner(cp.jump(states), cp.jump(states))
    assert 0.1 < J < 2.0


def test_newton_quadratic_convergence():
    cp = CoupledProblem("step", 1.0, nu=0.5, ubar=2.0)
    st = solve_state(cp.problems[0], np.zeros(cp.n_control), tol=1e-14)
    r = np.array(st.residuals)
    k = np.flatnonzero((r[:-1] < 1e-1) & (r[1:] > 1e-12))
    assert len(k) >= 1
    assert np.all(r[k + 1] / r[k] ** 2 < 1e2)


def test_adjoint_zero_jump(step):
    states = step.solve_states(np.zeros(step.n_control))
    adj = solve_adjoint(step.problems[0], states[0], np.zeros(step.n_control))
    assert np.all(adj.xi == 0) and np.all(adj.lam == 0)


def test_adjoint_matrix_is_state_jacobian_transpose(step, rng):
    prob = step.problems[0]
    s = prob.space
    w = rng.standard_normal(s.n_u)
    x = np.concatenate([w, np.zeros(s.n_p)])
    J = prob.jacobian(x)
    # independent assembly of the velocity block: diffusion + both convection linearisations
    A = sp.bmat([[prob.nu * assemble_diffusion(s) + assemble_convection(s, w, "linearized-first")
                  + assemble_convection(s, w, "linearized-second"), assemble_divergence(s).T],
                 [assemble_divergence(s), None]], format="csr")
    f = prob.free
    assert abs(J - A[f][:, f]).max() <= 1e-12
    # the adjoint solve uses exactly this transpose
    states = step.solve_states(0.05 * rng.standard_normal(step.n_control))
    jump = step.jump(states)
    adj = solve_adjoint(prob, states[0], jump)
    Js = prob.jacobian(states[0].x)
    y = np.concatenate([adj.xi, adj.lam])[f]
    rhs = np.concatenate([prob.sign * (step.interface.restriction(1).T @ (step.interface.M2 @ jump)),
                          np.zeros(s.n_p)])[f]
    assert np.abs(Js.T @ y - rhs).max() <= 1e-10 * max(1.0, np.abs(rhs).max())
    assert np.all(adj.xi[prob.dirichlet_dofs] == 0)
    assert np.abs(s.B @ adj.xi).max() <= 1e-10


def test_sensitivity_zero_and_linear(step, rng):
    states = step.solve_states(np.zeros(step.n_control))
    prob = step.problems[1]
    z = solve_sensitivity(prob, states[1], np.zeros(step.n_control))
    assert np.all(z.u == 0)
    d = rng.standard_normal(step.n_control)
    a = solve_sensitivity(prob, states[1], d)
    b = solve_sensitivity(prob, states[1], 2 * d)
    assert np.allclose(b.u, 2 * a.u, atol=1e-12)


@pytest.mark.parametrize("bench,h,nu,ubar", [("step", 1.0, 1.0, 1.0), ("cavity", 0.25, 0.2, 2.0)])
def test_duality_identity(bench, h, nu, ubar):
    cp = CoupledProblem(bench, h, nu, ubar)
    rng = np.random.default_rng(7)
    g = 0.1 * rng.standard_normal(cp.n_control)
    states = cp.solve_states(g)
    adj = cp.solve_adjoints(states)
    dxi = cp.trace_of(1, adj[0].xi) - cp.trace_of(2, adj[1].xi)
    jump = cp.jump(states)
    for _ in range(10):
        d = rng.standard_normal(cp.n_control)
        sens = cp.solve_sensitivities(states, d)
        lhs = cp.interface.inner(jump, cp.trace_of(1, sens[0].u) - cp.trace_of(2, sens[1].u))
        rhs = cp.interface.inner(d, dxi)
        assert lhs == pytest.approx(rhs, rel=1e-8)


def test_supremizer_examples(step, rng):
    prob = step.problems[0]
    s = prob.space
    assert np.all(compute_supremizer(prob, np.zeros(s.n_p)) == 0)
    p1, p2 = rng.standard_normal(s.n_p), rng.standard_normal(s.n_p)
    s1, s2 = compute_supremizer(prob, p1), compute_supremizer(prob, p2)
    assert np.allclose(compute_supremizer(prob, 2 * p1 - p2), 2 * s1 - s2, atol=1e-10)
    assert np.all(s1[prob.dirichlet_dofs] == 0)
    for _ in range(20):
        v = rng.standard_normal(s.n_u)
        v[prob.dirichlet_dofs] = 0.0
        assert abs(v @ (s.K @ s1) - v @ (s.B.T @ p1)) <= 1e-9


# monolithic ---------------------------------------------------------------------

def test_monolithic_zero_data():
    sol = solve_monolithic(generate_cavity_mesh(0.25), 1.0, 0.0, "cavity")
    assert np.abs(sol.u).max() == 0.0 and np.abs(sol.p).max() == 0.0


def _boundary_flux(space, u, tag):
    t, w = gauss_segment(3)
    uu = u.reshape(2, space.n_nodes)
    total = 0.0
    for (a, b), tg in space.boundary_edges.items():
        if tg != tag:
            continue
        m = space.n_vertices + space.edge_index[(a, b)]
        pa, pb = space.node_xy[a], space.node_xy[b]
        L = np.linalg.norm(pb - pa)
        N = np.column_stack([(1 - t) * (1 - 2 * t), 4 * t * (1 - t), t * (2 * t - 1)])
        ux = N @ uu[0, [a, m, b]]
        total += L * (w @ ux)
    return total


def test_monolithic_mass_conservation():
    sol = solve_monolithic(generate_step_mesh(0.5), 1.0, 1.0, "step")
    qin = _boundary_flux(sol.space, sol.u, BoundaryTag.INLET)
    qout = _boundary_flux(sol.space, sol.u, BoundaryTag.OUTLET)
    assert qin == pytest.approx(2.0, rel=1e-12)          # int 4/9 (y-2)(5-y) over [2, 5]
    assert abs(qin - qout) <= 1e-8


def test_monolithic_lid_values():
    sol = solve_monolithic(generate_cavity_mesh(0.125), 0.5, 2.0, "cavity")
    s = sol.space
    lid = s.boundary_nodes[BoundaryTag.LID]
    assert np.all(sol.u[lid] == 2.0) and np.all(sol.u[lid + s.n_nodes] == 0.0)
    assert abs(np.ones(s.n_p) @ (s.Mp @ sol.p)) < 1e-12


# inf-sup ------------------------------------------------------------------------

def _inf_sup(h):
    s = lower_cavity_space(h)
    prob = SubdomainProblem(s, 1, 1.0, ((BoundaryTag.WALL, zero_profile),))
    f = prob.free_u
    K = s.K[f][:, f].toarray()
    B = s.B[:, f].toarray()
    S = B @ np.linalg.solve(K, B.T)
    lam = scipy.linalg.eigh(S, s.Mp.toarray(), eigvals_only=True)
    return np.sqrt(lam.min())


def test_discrete_inf_sup_is_mesh_independent():
    beta = [_inf_sup(h) for h in (0.25, 0.125, 0.0625)]
    assert min(beta) > 0.1
    assert beta[-1] > 0.5 * beta[0]


@given(seed=st.integers(0, 2 ** 31 - 1))
def test_convection_trilinear_linearity(seed):
    s = lower_cavity_space(0.5)
    r = np.random.default_rng(seed)
    w1, w2, u, v = r.standard_normal((4, s.n_u))
    a = v @ (assemble_convection(s, w1 + 2 * w2) @ u)
    b = v @ (assemble_convection(s, w1) @ u) + 2 * v @ (assemble_convection(s, w2) @ u)
    assert a == pytest.approx(b, rel=1e-10, abs=1e-10)
    c1 = v @ (assemble_convection(s, w1, "linearized-first") @ u)
    c2 = v @ (assemble_convection(s, u) @ w1)
    assert c1 == pytest.approx(c2, rel=1e-10, abs=1e-10)
