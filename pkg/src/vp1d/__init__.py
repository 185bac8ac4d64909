"""1D Vlasov-Poisson solver with an infinite neutralizing background.

The mobile species' distribution f(t, x, v) is driven by the field of
its own net charge against a fixed background F(v):

    f_t + v f_x - E f_v = 0
    rho = int (F - f) dv
    E(t, x) = 1/2 ( int_{-inf}^x rho dy - int_x^inf rho dy )

Solutions are built by a fixed-point transport iteration over backward
characteristics, monitored in weighted decay norms, cross-checked by an
independent splitting solver, and accompanied by a suite of
verification experiments for the structural bounds the scheme relies
on.  See the cli module for the batch entry points.
"""
from .errors import (ContinuationRefused, InsufficientData, IntegrationFailure,
                     InvalidComparison, InvalidParameter, InvalidProfile,
                     NonConvergence, OutOfRange, PositivityViolation,
                     SolverError)
from .grid import PhaseGrid, simpson_weights
from .norms import WeightedProfile, triple_norm, weight, weighted_sup, weighted_sup_norm
from .profiles import (BackgroundProfile, InitialData, ValidationReport,
                       make_background, make_initial_data)
from .field import (DensitySnapshot, FieldHistory, charge_density,
                    field_from_density, tail_integral, weight_integral)
from .characteristics import (CharEndpoint, flow_backward, flow_backward_batch,
                              flow_roundtrip_error)
from .picard import (DuhamelParts, FlowedInitialData, IterationTrace,
                     SolutionHistory, apply_map, extend, initial_history, solve)
from .oracle import OracleConfig, splitting_solve
from . import diagnostics

__all__ = [
    "BackgroundProfile", "CharEndpoint", "ContinuationRefused",
    "DensitySnapshot", "DuhamelParts", "FieldHistory", "FlowedInitialData",
    "InitialData", "InsufficientData", "IntegrationFailure",
    "InvalidComparison", "InvalidParameter", "InvalidProfile",
    "IterationTrace", "NonConvergence", "OracleConfig", "OutOfRange",
    "PhaseGrid", "PositivityViolation", "SolutionHistory", "SolverError",
    "ValidationReport", "WeightedProfile", "apply_map", "charge_density",
    "diagnostics", "extend", "field_from_density", "flow_backward",
    "flow_backward_batch", "flow_roundtrip_error", "initial_history",
    "make_background", "make_initial_data", "simpson_weights", "solve",
    "splitting_solve", "tail_integral", "triple_norm", "weight",
    "weight_integral", "weighted_sup", "weighted_sup_norm",
]
