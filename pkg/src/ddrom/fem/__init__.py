"""Taylor-Hood finite elements: spaces, assembly and subdomain solves."""
from .assembly import (
    assemble_convection,
    assemble_diffusion,
    assemble_divergence,
    assemble_interface_load,
)
from .monolithic import MonolithicSolution, solve_monolithic, zero_mean
from .problem import (
    AdjointSolution,
    Interface,
    StateSolution,
    SubdomainProblem,
    compute_lifting,
    compute_supremizer,
    solve_adjoint,
    solve_sensitivity,
    solve_state,
    solve_stokes,
)
from .space import SparsePlan, TaylorHoodSpace

__all__ = [
    "AdjointSolution", "Interface", "MonolithicSolution", "SparsePlan", "StateSolution",
    "SubdomainProblem", "TaylorHoodSpace", "assemble_convection", "assemble_diffusion",
    "assemble_divergence", "assemble_interface_load", "compute_lifting", "compute_supremizer",
    "solve_adjoint", "solve_monolithic", "solve_sensitivity", "solve_state", "solve_stokes",
    "zero_mean",
]
