"""Lindblad quantum friction: symbolic phase-space verification and grid simulation."""
from .expr import (
    DomainError, Expr, SampleSpec, UnboundSymbolError, add, const, differentiate, evaluate,
    hbar_series_coefficient, is_zero_numeric, mul, power, series_coefficients, sqrt, substitute,
    ufunc, var,
)
from .friction import (
    PhysParams, build_exact_symbols, build_zero_order, verify_classical_limit, verify_dephasing,
    verify_ehrenfest, verify_limit_identity, verify_linear_no_go, verify_no_go_sample,
    verify_zero_order_equations, verify_zero_order_match,
)
from .lindblad import (
    DensityState, InvariantBreach, NotConverged, SimConfig, TrajectoryRecord,
    ehrenfest_residuals, initial_gaussian, lindblad_rhs, propagate, steady_state_balance,
)
from .phase_space import (
    StarConfig, dissipator_adjoint, dissipator_state, moyal_star, series_residual, star_series,
)
from .weyl import Grid, Potential, friction_operator, hamiltonian, observable_suite, weyl_quantize

__all__ = [
    "DomainError", "Expr", "SampleSpec", "UnboundSymbolError", "add", "const", "differentiate",
    "evaluate", "hbar_series_coefficient", "is_zero_numeric", "mul", "power",
    "series_coefficients", "sqrt", "substitute", "ufunc", "var",
    "PhysParams", "build_exact_symbols", "build_zero_order", "verify_classical_limit",
    "verify_dephasing", "verify_ehrenfest", "verify_limit_identity", "verify_linear_no_go",
    "verify_no_go_sample", "verify_zero_order_equations", "verify_zero_order_match",
    "DensityState", "InvariantBreach", "NotConverged", "SimConfig", "TrajectoryRecord",
    "ehrenfest_residuals", "initial_gaussian", "lindblad_rhs", "propagate",
    "steady_state_balance",
    "StarConfig", "dissipator_adjoint", "dissipator_state", "moyal_star", "series_residual",
    "star_series",
    "Grid", "Potential", "friction_operator", "hamiltonian", "observable_suite", "weyl_quantize",
]
