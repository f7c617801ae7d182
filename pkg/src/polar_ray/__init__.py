"""Toric Kaehler geodesic rays and their limiting polarizations, checked numerically."""

__version__ = "0.1.0"

from .calculus import (
    build_frame,
    check_moment_identity,
    differentiate,
    fd_oracle,
    hamiltonian_field,
    moment_map,
    poisson_bracket,
)
from .errors import PolarRayError
from .flow import Monomial, check_commuting_formula, check_product_law, closed_flow, lie_series
from .model import LocalModel, ModelPoint, ScalarField, build_model, regularity, validate_invariance
from .polarization import (
    build_D_and_I,
    build_P_J,
    build_P_mix,
    build_P_t,
    convergence_sweep,
    principal_angles,
)
from .report import emit_plot_data, run_scenario
from .scenarios import Scenario, builtin, list_builtins, load_scenario
from .structure import block_matrix, check_transition_consistency, check_type_11, complex_structure

__all__ = [
    "LocalModel",
    "ModelPoint",
    "Monomial",
    "PolarRayError",
    "ScalarField",
    "Scenario",
    "block_matrix",
    "build_D_and_I",
    "build_P_J",
    "build_P_mix",
    "build_P_t",
    "build_frame",
    "build_model",
    "builtin",
    "check_commuting_formula",
    "check_moment_identity",
    "check_product_law",
    "check_transition_consistency",
    "check_type_11",
    "closed_flow",
    "complex_structure",
    "convergence_sweep",
    "differentiate",
    "emit_plot_data",
    "fd_oracle",
    "hamiltonian_field",
    "lie_series",
    "list_builtins",
    "load_scenario",
    "moment_map",
    "poisson_bracket",
    "principal_angles",
    "regularity",
    "run_scenario",
    "validate_invariance",
]
