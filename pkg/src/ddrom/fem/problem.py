"""Subdomain Navier-Stokes problems: interface coupling, Newton state solves,
adjoint and sensitivity solves, liftings and supremizers.

Unknowns are stored as one vector ``x = [u, p]`` of length ``space.n``.
Dirichlet velocity dofs (and an optional pinned pressure dof) are fixed and
eliminated: linear systems are posed on the remaining *free* dofs only, so the
adjoint operator is literally the transpose of the state Jacobian.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import NewtonDiverged, SingularMatrix, SingularSystem, TraceMismatch
from ..linalg import lu_factorize
from .assembly import convection_blocks, velocity_block_values
from .quadrature import gauss_segment
from .space import SparsePlan

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
NEWTON_MAX_IT = 25
MAX_HALVINGS = 8
MAX_GROWTH = 4


def _p2_segment(t):
    """Quadratic Lagrange basis on [0, 1] with nodes (0, 1/2, 1)."""
    return np.column_stack([(1 - t) * (1 - 2 * t), 4 * t * (1 - t), t * (2 * t - 1)])


class Interface:
    """Quadratic trace space on the interface and its links to subdomain spaces.

    Trace nodes follow the interface path: vertex 0, edge 0, vertex 1, ...
    Control vectors are component-blocked like velocities:
    ``g[c * n_trace + k]``.
    """

    def __init__(self, trace, spaces, tol=1e-10):
        ids = trace.vertex_ids
        keys, xy = [], []
        for k, v in enumerate(ids):
            keys.append((int(v), int(v)))
            xy.append(trace.points[k])
            if k + 1 < len(ids):
                a, b = sorted((int(v), int(ids[k + 1])))
                keys.append((a, b))
                xy.append(0.5 * (trace.points[k] + trace.points[k + 1]))
        self.trace = trace
        self.keys = keys
        self.node_xy = np.array(xy)
        self.n_trace = len(keys)
        self.n_control = 2 * self.n_trace
        self.tol = tol

        t, w = gauss_segment(3)
        N = _p2_segment(t)
        loc = np.einsum("q,qi,qj->ij", w, N, N)
        rows, cols, vals = [], [], []
        seg = np.diff(trace.arclength)
        for e, length in enumerate(seg):
            dofs = [2 * e, 2 * e + 1, 2 * e + 2]
            for i in range(3):
                for j in range(3):
                    rows.append(dofs[i])
                    cols.append(dofs[j])
                    vals.append(length * loc[i, j])
        self.M_gamma = sp.csr_matrix((vals, (rows, cols)), shape=(self.n_trace, self.n_trace))
        self.M2 = sp.block_diag([self.M_gamma, self.M_gamma], format="csr")
        self._ones = np.ones(self.n_trace)
        self.spaces = tuple(spaces)
        self._R = [self.restriction_for(s) for s in self.spaces]

    @property
    def length(self):
        return self.trace.length

    def restriction_for(self, space):
        """Sparse trace operator ``R`` with ``R u`` the interface trace of ``u``."""
        lookup = {(int(a), int(b)): k for k, (a, b) in enumerate(space.node_keys)}
        nodes = np.empty(self.n_trace, dtype=np.int64)
        for k, key in enumerate(self.keys):
            if key not in lookup:
                raise TraceMismatch(f"interface node {key} missing from subdomain space")
            nodes[k] = lookup[key]
        if np.abs(space.node_xy[nodes] - self.node_xy).max() > self.tol:
            raise TraceMismatch("interface node coordinates disagree between trace and subdomain")
        rows = np.arange(self.n_control)
        cols = np.concatenate([nodes, nodes + space.n_nodes])
        return sp.csr_matrix((np.ones(self.n_control), (rows, cols)), shape=(self.n_control, space.n_u))

    def restriction(self, index):
        return self._R[index - 1]

    def inner(self, a, b):
        return float(a @ (self.M2 @ b))

    def norm(self, a):
        return float(np.sqrt(max(self.inner(a, a), 0.0)))


@dataclass
class StateSolution:
    u: np.ndarray
    p: np.ndarray
    iterations: int = 0
    residuals: list = field(default_factory=list)

    @property
    def x(self):
        return np.concatenate([self.u, self.p])


@dataclass
class AdjointSolution:
    xi: np.ndarray
    lam: np.ndarray


class SubdomainProblem:
    """Stationary Navier-Stokes on one subdomain with interface Neumann control.

    Parameters
    ----------
    space : TaylorHoodSpace
    index : int
        1 or 2; the control enters with sign +1 on subdomain 1 and -1 on 2.
        Use 0 for a problem without interface (the monolithic oracle).
    nu, ubar : float
        Viscosity and magnitude of the Dirichlet data.
    dirichlet : sequence of (tag, profile)
        ``profile(x, y) -> (ux, uy)`` at unit magnitude. Later entries
        override earlier ones on shared nodes.
    interface : Interface, optional
    force : callable, optional
        Body force ``f(x, y) -> (fx, fy)``.
    pin_pressure : bool
        Fix pressure dof 0 to zero (needed when the boundary is all Dirichlet).
    """

    def __init__(self, space, index, nu, dirichlet=(), ubar=1.0, interface=None, force=None, pin_pressure=False):
        self.space = space
        self.index = index
        self.sign = {1: 1.0, 2: -1.0}.get(index, 0.0)
        self.nu = float(nu)
        self.ubar = float(ubar)
        self.dirichlet = tuple(dirichlet)
        self.interface = interface
        self.force = force
        self.pin_pressure = pin_pressure

        unit = np.zeros(space.n_u)
        fixed = np.zeros(space.n, dtype=bool)
        for tag, profile in self.dirichlet:
            nodes = space.boundary_nodes.get(tag, np.zeros(0, dtype=np.int64))
            dofs = space.velocity_dofs(nodes)
            x, y = space.node_xy[nodes, 0], space.node_xy[nodes, 1]
            ux, uy = profile(x, y)
            unit[dofs] = np.concatenate([np.broadcast_to(ux, x.shape), np.broadcast_to(uy, x.shape)])
            fixed[dofs] = True
        if pin_pressure:
            fixed[space.n_u] = True
        self.unit_dirichlet = unit
        self.fixed = fixed
        self.free = np.flatnonzero(~fixed)
        self.free_u = self.free[self.free < space.n_u]
        self.n_free = len(self.free)
        fmap = -np.ones(space.n, dtype=np.int64)
        fmap[self.free] = np.arange(self.n_free)
        self.fmap = fmap

        nu_ = space.n_u
        rows = np.concatenate([fmap[space._v_rows], fmap[nu_ + space._b_rows], fmap[space._b_cols]])
        cols = np.concatenate([fmap[space._v_cols], fmap[space._b_cols], fmap[nu_ + space._b_rows]])
        self.plan = SparsePlan(rows, cols, (self.n_free, self.n_free))
        self.body_load = space.load_vector(force) if force is not None else np.zeros(nu_)
        self._lin_cache = None

    def set_parameters(self, nu=None, ubar=None):
        if nu is not None:
            self.nu = float(nu)
        if ubar is not None:
            self.ubar = float(ubar)
        self._lin_cache = None

    @property
    def dirichlet_values(self):
        return self.ubar * self.unit_dirichlet

    @property
    def dirichlet_dofs(self):
        return np.flatnonzero(self.fixed[: self.space.n_u])

    # operators

    def load(self, g=None):
        """Right-hand side on velocity dofs: body force plus interface control."""
        f = self.body_load.copy()
        if g is not None and self.interface is not None and self.sign != 0.0:
            f += self.sign * (self.interface.restriction(self.index).T @ (self.interface.M2 @ g))
        return f

    def residual(self, x, rhs, convection=True):
        """Full residual ``[nu K u + c(u,u,.) + B^T p - rhs, B u]``."""
        s = self.space
        u, p = x[: s.n_u], x[s.n_u:]
        ru = self.nu * (s.K @ u) + s.B.T @ p - rhs
        if convection:
            _, _, vec = convection_blocks(s, u)
            ru += s.scatter_vector(vec)
        return np.concatenate([ru, s.B @ u])

    def jacobian(self, x, convection=True):
        """Free-dof Jacobian ``[[nu K + C1 + C2, B^T], [B, 0]]`` at ``x``."""
        s = self.space
        if convection:
            adv, jac1, _ = convection_blocks(s, x[: s.n_u])
            vel = velocity_block_values(s, adv=adv, jac1=jac1, diag=self.nu * s.k_local)
        else:
            vel = velocity_block_values(s, diag=self.nu * s.k_local)
        bl = s.b_local.ravel()
        return self.plan.build(np.concatenate([vel.ravel(), bl, bl]))

    def factor(self, A):
        try:
            return lu_factorize(A)
        except SingularMatrix as exc:
            raise SingularSystem(str(exc)) from exc

    def linearization(self, u, p=None):
        """Cached factorization of the Jacobian at velocity ``u``."""
        c = self._lin_cache
        if c is not None and c[0] == self.nu and np.array_equal(c[1], u):
            return c[2]
        x = np.concatenate([u, np.zeros(self.space.n_p) if p is None else p])
        fac = self.factor(self.jacobian(x))
        self._lin_cache = (self.nu, u.copy(), fac)
        return fac

    def start_vector(self, guess=None):
        x = np.zeros(self.space.n)
        if guess is not None:
            x[: self.space.n_u] = guess.u
            x[self.space.n_u:] = guess.p
        x[: self.space.n_u][self.fixed[: self.space.n_u]] = self.dirichlet_values[self.fixed[: self.space.n_u]]
        if self.pin_pressure:
            x[self.space.n_u] = 0.0
        return x

    def split(self, x):
        return x[: self.space.n_u].copy(), x[self.space.n_u:].copy()


def solve_stokes(problem, g=None, rhs=None):
    """Linear Stokes solve (convection dropped) with the problem's boundary data."""
    rhs = problem.load(g) if rhs is None else rhs
    x = problem.start_vector()
    r = problem.residual(x, rhs, convection=False)[problem.free]
    fac = problem.factor(problem.jacobian(x, convection=False))
    x[problem.free] -= fac.solve(r)
    return StateSolution(*problem.split(x))


def solve_state(problem, g=None, guess=None, tol=NEWTON_TOL, max_iter=NEWTON_MAX_IT, convection=True):
    """Damped Newton solve of the subdomain state for control ``g``.

    Starts from ``guess`` (a :class:`StateSolution`) or from the Stokes
    solution. Stops when the free-dof residual max-norm is below
    ``tol * (1 + |rhs|_inf)``.

    Raises
    ------
    NewtonDiverged
        After ``max_iter`` iterations or ``MAX_GROWTH`` successive residual increases.
    """
    rhs = problem.load(g)
    if not convection:
        return solve_stokes(problem, g)
    x = problem.start_vector(guess) if guess is not None else solve_stokes(problem, g).x
    target = tol * (1.0 + np.abs(rhs).max(initial=0.0))
    free = problem.free

    def res(v):
        return problem.residual(v, rhs)[free]

    r = res(x)
    rn = np.abs(r).max(initial=0.0)
    history = [rn]
    growth = 0
    for it in range(max_iter + 1):
        if rn <= target:
            u, p = problem.split(x)
            return StateSolution(u, p, it, history)
        if it == max_iter:
            break
        fac = problem.factor(problem.jacobian(x))
        dx = fac.solve(r)
        step = 1.0
        best = None
        for _ in range(MAX_HALVINGS + 1):
            xt = x.copy()
            xt[free] -= step * dx
            rt = res(xt)
            rtn = np.abs(rt).max(initial=0.0)
            if np.isfinite(rtn) and (best is None or rtn < best[2]):
                best = (xt, rt, rtn)
            if np.isfinite(rtn) and rtn < rn:
                break
            step *= 0.5
        if best is None:
            raise NewtonDiverged("Newton produced non-finite residuals", history)
        growth = growth + 1 if best[2] > rn else 0
        x, r, rn = best
        history.append(rn)
        log.debug("newton it %d residual %.3e", it + 1, rn)
        if growth >= MAX_GROWTH:
            raise NewtonDiverged(f"residual grew over {MAX_GROWTH} successive steps", history)
    raise NewtonDiverged(f"no convergence in {max_iter} Newton iterations (residual {rn:.3e})", history)


def solve_adjoint(problem, state, jump):
    """Adjoint of the state linearisation driven by the interface mismatch.

    Solves ``J^T [xi; lam] = [sign R^T M2 jump; 0]`` on the free dofs, where
    ``J`` is the state Jacobian at ``state``.
    """
    s = problem.space
    itf = problem.interface
    src = problem.sign * (itf.restriction(problem.index).T @ (itf.M2 @ jump))
    rhs = np.concatenate([src, np.zeros(s.n_p)])[problem.free]
    y = np.zeros(s.n)
    if np.any(rhs):
        y[problem.free] = problem.linearization(state.u, state.p).solve(rhs, trans=True)
    return AdjointSolution(y[: s.n_u], y[s.n_u:])


def solve_sensitivity(problem, state, g_dir):
    """Derivative of the state with respect to the control in direction ``g_dir``."""
    s = problem.space
    rhs = np.concatenate([problem.load(g_dir) - problem.body_load, np.zeros(s.n_p)])[problem.free]
    y = np.zeros(s.n)
    if np.any(rhs):
        y[problem.free] = problem.linearization(state.u, state.p).solve(rhs)
    return StateSolution(y[: s.n_u], y[s.n_u:])


def compute_lifting(problem):
    """Stokes extension of the unit-magnitude Dirichlet data.

    The lifting for magnitude ``ubar`` is ``ubar`` times the returned field.
    Homogeneous Neumann conditions hold on every non-Dirichlet boundary part.
    """
    if not np.any(problem.unit_dirichlet):
        return np.zeros(problem.space.n_u)
    saved = problem.ubar
    problem.ubar = 1.0
    try:
        sol = solve_stokes(problem, rhs=np.zeros(problem.space.n_u))
    finally:
        problem.ubar = saved
    return sol.u


class SupremizerSolver:
    """Factorised Riesz map ``(grad v, grad s) = b(v, p)`` on the homogeneous velocity space."""

    def __init__(self, problem):
        self.problem = problem
        f = problem.free_u
        self.fac = problem.factor(problem.space.K[f][:, f])

    def __call__(self, p):
        s = self.problem.space
        out = np.zeros(s.n_u)
        rhs = (s.B.T @ p)[self.problem.free_u]
        if np.any(rhs):
            out[self.problem.free_u] = self.fac.solve(rhs)
        return out


def compute_supremizer(problem, p):
    """Velocity ``s`` vanishing on Dirichlet dofs with ``(grad v, grad s) = b(v, p)`` for all such ``v``."""
    return SupremizerSolver(problem)(np.asarray(p, dtype=float))
