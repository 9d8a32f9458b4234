"""POD-Galerkin reduced model of the interface-control problem."""
from .online import (
    GRADIENT_MODES,
    ReducedProblem,
    ReducedSolution,
    ReducedState,
    optimize_reduced,
    reconstruct,
    reconstruct_adjoints,
    solve_reduced_adjoint,
    solve_reduced_state,
)
from .operators import ReducedOperators, SubdomainOperators, project_operators, trilinear
from .pipeline import OfflineModel, build_offline
from .pod import PodBasis, compress, inner_products, pod
from .sampling import ParameterSample, sample_parameters, validation_grid
from .snapshots import ADJOINT_MODES, COMPONENTS, SnapshotContext, SnapshotSet, collect_snapshots, predict_control

__all__ = [
    "ADJOINT_MODES", "COMPONENTS", "GRADIENT_MODES", "OfflineModel", "ParameterSample", "PodBasis",
    "ReducedOperators", "ReducedProblem", "ReducedSolution", "ReducedState", "SnapshotContext",
    "SnapshotSet", "SubdomainOperators", "build_offline", "collect_snapshots", "compress",
    "inner_products", "optimize_reduced", "pod", "predict_control", "project_operators",
    "reconstruct", "reconstruct_adjoints", "sample_parameters", "solve_reduced_adjoint",
    "solve_reduced_state", "trilinear", "validation_grid",
]
