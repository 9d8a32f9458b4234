"""Full-order interface-control optimisation."""
from .coupled import (
    CoupledProblem,
    FomObjective,
    FomResult,
    eval_functional,
    eval_gradient,
    optimize,
)
from .optim import METHODS, TRACE_COLUMNS, OptConfig, OptResult, OptTrace, minimize
from .report import REPORT_COLUMNS, ErrorReport, compute_errors, format_value, glue_zero_mean

__all__ = [
    "CoupledProblem", "ErrorReport", "FomObjective", "FomResult", "METHODS", "OptConfig",
    "OptResult", "OptTrace", "REPORT_COLUMNS", "TRACE_COLUMNS", "compute_errors",
    "eval_functional", "eval_gradient", "format_value", "glue_zero_mean", "minimize", "optimize",
]
