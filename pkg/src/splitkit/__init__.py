"""Exponential splitting integrators for u' = (A + B(t)) u."""
from .errors import (
    AccuracyError,
    ConfigurationError,
    ConvergenceError,
    InvalidArgument,
    ResourceError,
    SplitkitError,
    UnsupportedQuadrature,
)
from .operators import DenseOperator, EvolutionProblem, TimeDependentOperator, b_derivative, commutator, effective_C
from .expaction import ExpActionBackend, exp_action, expm_dense
from .quadrature import (
    OPTIMAL_TAU_F,
    d_family_rules,
    error_kernel,
    f_family_rules,
    kernel_integral,
    kernel_prediction,
    optimal_tau_F,
    quadrature_error_oracle,
)
from .splittings import SplittingScheme, build_D, build_F, build_scheme, compile_from_quadrature, integrate, step
from .duhamel import NeumannConfig, neumann_iterate, reference_solution
from .models import random_matrix_problem, schrodinger_problem, transport_exact, transport_problem
from .harness import ErrorTable, StudyConfig, emit_outputs, estimate_order, run_convergence_study

__version__ = "0.1.0"
