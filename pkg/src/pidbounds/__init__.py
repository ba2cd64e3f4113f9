"""Sharp bounds for partially identified parameters under measurement error."""

from .analytic import IntervalUnion, prop3_bounds, prop3_corollary_bounds
from .constraints import (
    AssumptionError,
    DataError,
    ObservedData,
    compile_assumption,
    compile_causal,
    compile_measurement,
    compile_observed,
    compile_probability,
    observed_from_psi,
    parse_label,
)
from .linear import LinearConstraint, LinearExpression
from .model import (
    NetworkError,
    NetworkSpec,
    NotInFineClassError,
    VariableSpec,
    apply_prop2_reductions,
    check_fine_conditions,
    relax_to_linear,
    validate_network,
)
from .oracle import generative_containment_trial, oracle_bounds, parametric_chain_search
from .pipeline import Model, ModelContext, prepare_network, run
from .response import ProblemTooLarge, ResponseSpace, enumerate_response_space, propagate
from .solver import Bounds, LinearProgram, ScipyBackend, SimplexBackend, simplex_solve, solve_bounds
from .specfile import SpecError, load_spec_text, parse_spec
from .targets import TargetSpec, build_target

__version__ = "0.1.0"
