"""Spectral bounds, net reproduction numbers and positive steady states of
nonlinear age-structured population models with a nonlocal birth condition."""

from .errors import (
    BracketFailure, ConvergenceFailure, DomainError, ExprSyntaxError, HypothesisViolation,
    InputError, MaxIterations, MonotonicityViolation, NoSignChange, ScenarioError,
    SimulationOverflow, SingularResolvent, SolverError, SteadyPopError, UnknownIdentifier,
    ZeroFertility, ZeroPopulation,
)
from .model import (
    AgeGrid, Density, ModelKind, Monotonicity, RateFunction, VitalRates, f1_hierarchy,
    f2_total, survival,
)
from .scenario import Scenario, load_catalog, load_scenario, scenario_from_dict
from .spectral import (
    characteristic_k, net_reproduction, net_reproduction_extinction, resolvent_apply,
    spectral_bound, spectral_bound_extinction,
)
from .steady import check_hypotheses, project_to_level_set, solve_steady
from .sim import simulate, validate_against_steady

__version__ = "0.1.0"
