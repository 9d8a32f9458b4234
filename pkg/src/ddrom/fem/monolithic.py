"""Whole-domain Navier-Stokes solve used as the reference for error reports."""
from dataclasses import dataclass

import numpy as np

from ..benchmarks import get_benchmark
from ..mesh import BoundaryTag
from .problem import StateSolution, SubdomainProblem, solve_state
from .space import TaylorHoodSpace


@dataclass
class MonolithicSolution:
    space: TaylorHoodSpace
    problem: SubdomainProblem
    u: np.ndarray
    p: np.ndarray
    iterations: int


def monolithic_problem(mesh, nu, ubar, benchmark=None, space=None, force=None):
    bench = get_benchmark(benchmark or mesh.name)
    space = space or TaylorHoodSpace(mesh.vertices, mesh.triangles,
                                     {e: t for e, t in mesh.boundary_edges.items() if t != BoundaryTag.INTERFACE})
    return SubdomainProblem(space, 0, nu, bench.dirichlet, ubar=ubar, force=force,
                            pin_pressure=not bench.has_outflow)


def zero_mean(space, p):
    """Shift a pressure to zero mean over the space's domain."""
    area = space.areas.sum()
    return p - (np.ones(space.n_p) @ (space.Mp @ p)) / area


def solve_monolithic(mesh, nu, ubar, benchmark=None, guess=None, space=None, force=None):
    """Newton solve on the whole domain, ignoring subdomain labels.

    With all-Dirichlet boundaries the pressure is fixed at one vertex during
    the solve and then shifted to zero mean.
    """
    prob = monolithic_problem(mesh, nu, ubar, benchmark, space, force)
    sol = solve_state(prob, guess=guess)
    p = zero_mean(prob.space, sol.p) if prob.pin_pressure else sol.p
    return MonolithicSolution(prob.space, prob, sol.u, p, sol.iterations)


def as_state(sol):
    return StateSolution(sol.u, sol.p, sol.iterations)
