"""Definitions of the two test cases: geometry, boundary data, parameter ranges."""
from dataclasses import dataclass

import numpy as np

from .mesh import BoundaryTag, generate_cavity_mesh, generate_step_mesh


def inlet_profile(x, y):
    """Parabolic inflow of unit magnitude on the inlet y in [2, 5]."""
    return 4.0 / 9.0 * (y - 2.0) * (5.0 - y), np.zeros_like(y)


def zero_profile(x, y):
    return np.zeros_like(x), np.zeros_like(x)


def lid_profile(x, y):
    return np.ones_like(x), np.zeros_like(x)


@dataclass(frozen=True)
class Benchmark:
    name: str
    make_mesh: object
    dirichlet: tuple
    nu_range: tuple
    ubar_range: tuple
    default_h: float
    queries: tuple            # (ubar, nu) pairs used for the online studies
    n_modes: dict             # default reduced dimensions
    fom_iterations: int
    rom_iterations: int

    @property
    def has_outflow(self):
        """True when part of the boundary carries a natural (Neumann) condition."""
        return self.name == "step"


STEP = Benchmark(
    name="step",
    make_mesh=generate_step_mesh,
    # walls first so the inlet profile (zero at its ends anyway) wins at shared corners
    dirichlet=((BoundaryTag.WALL, zero_profile), (BoundaryTag.INLET, inlet_profile)),
    nu_range=(0.5, 2.0),
    ubar_range=(0.5, 6.5),
    default_h=0.5,
    queries=((1.0, 1.0), (4.0, 0.75), (4.5, 0.7)),
    n_modes={"u": 10, "s": 10, "p": 10, "g": 10, "xi": 30},
    fom_iterations=40,
    rom_iterations=10,
)

CAVITY = Benchmark(
    name="cavity",
    make_mesh=generate_cavity_mesh,
    # the lid is applied last so it owns the two top corners
    dirichlet=((BoundaryTag.WALL, zero_profile), (BoundaryTag.LID, lid_profile)),
    nu_range=(0.05, 2.0),
    ubar_range=(0.5, 5.0),
    default_h=0.1,
    queries=((5.0, 0.05), (1.0, 0.1)),
    n_modes={"u": 10, "s": 10, "p": 10, "g": 10, "xi": 15},
    fom_iterations=25,
    rom_iterations=15,
)

BENCHMARKS = {b.name: b for b in (STEP, CAVITY)}


def get_benchmark(name):
    try:
        return BENCHMARKS[name]
    except KeyError:
        raise ValueError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}") from None
