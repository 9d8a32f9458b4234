"""Two-subdomain coupling: functional, adjoint gradient, optimisation and error reports."""
import logging
from dataclasses import dataclass

import numpy as np

from ..benchmarks import get_benchmark
from ..errors import DimensionMismatch, MeshMismatch, NewtonDiverged, TraceMismatch
from ..fem.monolithic import solve_monolithic
from ..fem.problem import (
    Interface,
    StateSolution,
    SubdomainProblem,
    solve_adjoint,
    solve_sensitivity,
    solve_state,
)
from ..fem.space import TaylorHoodSpace
from ..mesh import extract_interface
from .optim import OptConfig, minimize

log = logging.getLogger(__name__)


class CoupledProblem:
    """A benchmark mesh split in two subdomain problems sharing an interface.

    Parameters
    ----------
    benchmark : str or Benchmark
    h : float, optional
        Mesh size; defaults to the benchmark's desk resolution.
    nu, ubar : float
    mesh : Mesh, optional
        Reuse an existing mesh instead of generating one.
    """

    def __init__(self, benchmark, h=None, nu=1.0, ubar=1.0, mesh=None):
        self.benchmark = get_benchmark(benchmark) if isinstance(benchmark, str) else benchmark
        self.h = h or self.benchmark.default_h
        self.mesh = mesh or self.benchmark.make_mesh(self.h)
        self.trace = extract_interface(self.mesh)
        subs = [self.mesh.submesh(i) for i in (1, 2)]
        self.spaces = [TaylorHoodSpace(s.vertices, s.triangles, s.boundary_edges, s.vertex_ids) for s in subs]
        self.interface = Interface(self.trace, self.spaces)
        self.problems = [SubdomainProblem(self.spaces[i - 1], i, nu, self.benchmark.dirichlet, ubar, self.interface)
                         for i in (1, 2)]
        self.nu, self.ubar = float(nu), float(ubar)
        self._warm = None
        self.n_evals = 0

    @property
    def n_control(self):
        return self.interface.n_control

    @property
    def n_dofs(self):
        return sum(s.n for s in self.spaces)

    def set_parameters(self, nu=None, ubar=None):
        for p in self.problems:
            p.set_parameters(nu, ubar)
        self.nu, self.ubar = self.problems[0].nu, self.problems[0].ubar
        self._warm = None

    def trace_of(self, index, u):
        return self.interface.restriction(index) @ u

    def jump(self, states):
        return self.trace_of(1, states[0].u) - self.trace_of(2, states[1].u)

    def solve_states(self, g, guesses=None, tol=None):
        guesses = guesses if guesses is not None else self._warm
        kw = {} if tol is None else {"tol": tol}
        out = []
        for k, prob in enumerate(self.problems):
            guess = None if guesses is None else guesses[k]
            try:
                out.append(solve_state(prob, g, guess=guess, **kw))
            except NewtonDiverged:
                if guess is None:
                    raise
                out.append(solve_state(prob, g, **kw))
        self._warm = out
        self.n_evals += 1
        return out

    def solve_adjoints(self, states):
        jump = self.jump(states)
        return [solve_adjoint(p, st, jump) for p, st in zip(self.problems, states)]

    def solve_sensitivities(self, states, g_dir):
        return [solve_sensitivity(p, st, g_dir) for p, st in zip(self.problems, states)]

    # monolithic reference and restriction maps

    def monolithic(self, guess=None):
        return solve_monolithic(self.mesh, self.nu, self.ubar, self.benchmark.name, guess=guess)

    def restriction_maps(self, mono_space):
        """Node index arrays mapping each subdomain space into ``mono_space``."""
        lookup = {(int(a), int(b)): k for k, (a, b) in enumerate(mono_space.node_keys)}
        maps = []
        for s in self.spaces:
            try:
                nodes = np.array([lookup[(int(a), int(b))] for a, b in s.node_keys], dtype=np.int64)
            except KeyError as exc:
                raise MeshMismatch(f"subdomain node {exc.args[0]} not in the reference mesh") from None
            if np.abs(mono_space.node_xy[nodes] - s.node_xy).max() > 1e-10:
                raise MeshMismatch("node coordinates differ between subdomain and reference mesh")
            maps.append(nodes)
        return maps

    def restrict(self, mono):
        """Restriction of a monolithic solution to the two subdomains."""
        out = []
        for s, nodes in zip(self.spaces, self.restriction_maps(mono.space)):
            u = np.concatenate([mono.u[nodes], mono.u[nodes + mono.space.n_nodes]])
            p = mono.p[nodes[: s.n_vertices]]
            out.append(StateSolution(u, p))
        return out

    def exact_flux(self, mono):
        """Control that makes subdomain 1 reproduce the monolithic restriction.

        It is the discrete normal stress of the monolithic solution on the
        interface: the subdomain-1 residual of the restricted solution, which
        lives on interface rows only, inverted through the interface load
        operator in the least-squares (minimum-norm) sense.
        """
        st = self.restrict(mono)[0]
        prob = self.problems[0]
        r = prob.residual(st.x, prob.body_load)[: prob.space.n_u]
        A = (self.interface.restriction(1).T @ self.interface.M2).toarray()
        rows = prob.free_u[np.abs(A[prob.free_u]).sum(axis=1) > 0]
        g, *_ = np.linalg.lstsq(prob.sign * A[rows], r[rows], rcond=None)
        return g


def eval_functional(states, g, gamma, coupled):
    """``0.5 |u1 - u2|^2 + 0.5 gamma |g|^2``, both norms on the interface."""
    itf = coupled.interface
    if g.shape != (itf.n_control,):
        raise TraceMismatch(f"control has {g.shape[0]} coefficients, expected {itf.n_control}")
    jump = coupled.jump(states)
    return 0.5 * itf.inner(jump, jump) + 0.5 * gamma * itf.inner(g, g)


def eval_gradient(adjoints, g, gamma, coupled):
    """Riesz representative in the interface L2 product: ``gamma g + (xi1 - xi2)|_interface``."""
    itf = coupled.interface
    if g.shape != (itf.n_control,):
        raise TraceMismatch(f"control has {g.shape[0]} coefficients, expected {itf.n_control}")
    return gamma * g + coupled.trace_of(1, adjoints[0].xi) - coupled.trace_of(2, adjoints[1].xi)


class FomObjective:
    """Reduced-space view ``g -> J(u(g), g)`` used by the optimiser."""

    def __init__(self, coupled, gamma=0.0):
        self.coupled = coupled
        self.gamma = gamma

    def evaluate(self, g):
        states = self.coupled.solve_states(g)
        return eval_functional(states, g, self.gamma, self.coupled), states

    def gradient(self, g, states):
        adj = self.coupled.solve_adjoints(states)
        return eval_gradient(adj, g, self.gamma, self.coupled), adj

    def jump_norm(self, f, states):
        return self.coupled.interface.norm(self.coupled.jump(states))


@dataclass
class FomResult:
    states: list
    adjoints: list
    g: np.ndarray
    trace: object
    iterations: int
    converged: bool
    history: list = None


def optimize(coupled, cfg=OptConfig(), g0=None, callback=None, keep_history=False):
    """Drive the interface control to minimise the coupling functional.

    Returns a :class:`FomResult` with the final states, adjoints, control and
    trace. With ``keep_history`` the adjoints of every accepted iterate are
    kept as well (``history`` is a list of ``(k, g, states, adjoints)``).
    """
    if g0 is None:
        g0 = np.zeros(coupled.n_control)
    if g0.shape != (coupled.n_control,):
        raise DimensionMismatch(f"g0 has {g0.shape[0]} coefficients, expected {coupled.n_control}")
    log.info("optimising %s (nu=%g, ubar=%g, gamma=%g, %s)", coupled.benchmark.name, coupled.nu,
             coupled.ubar, cfg.gamma, cfg.method)
    obj = FomObjective(coupled, cfg.gamma)
    history = [] if keep_history else None

    def cb(k, x, states, adj):
        if history is not None:
            history.append((k, x.copy(), states, adj))
        if callback is not None:
            callback(k, x, states, adj)

    coupled._warm = None
    res = minimize(obj.evaluate, obj.gradient, g0, cfg, inner=coupled.interface.inner,
                   jump_norm=obj.jump_norm, callback=cb, recoverable=(NewtonDiverged,))
    return FomResult(res.ctx, res.aux, res.x, res.trace, res.iterations, res.converged, history)
