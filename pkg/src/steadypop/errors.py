"""Exception hierarchy.

Every numerical failure derives from :class:`SolverError` so that frontends
can map it to a single exit status; input problems derive from
:class:`InputError`.
"""


class SteadyPopError(Exception):
    """Base class for all package errors."""

    code = "error"


class InputError(SteadyPopError, ValueError):
    code = "input_error"


class ExprSyntaxError(InputError):
    """Malformed rate expression.

    ``offset`` is the byte offset into the source text and ``expected``
    describes what the parser wanted to see there.
    """

    code = "syntax_error"

    def __init__(self, message, offset=0, expected=""):
        self.offset = offset
        self.expected = expected
        detail = f"{message} at byte {offset}"
        if expected:
            detail += f" (expected {expected})"
        super().__init__(detail)


class UnknownIdentifier(ExprSyntaxError):
    code = "unknown_identifier"


class ScenarioError(InputError):
    code = "scenario_error"


class SolverError(SteadyPopError, ArithmeticError):
    code = "solver_error"


class DomainError(SolverError):
    """Rate expression evaluated outside its domain, or to a non-finite value."""

    code = "domain_error"


class ZeroPopulation(SolverError):
    code = "zero_population"


class ZeroFertility(SolverError):
    code = "zero_fertility"


class BracketFailure(SolverError):
    code = "bracket_failure"


class SingularResolvent(SolverError):
    code = "singular_resolvent"


class NoSignChange(SolverError):
    """``R(alpha * d) - 1`` kept one sign over the whole ray bracket."""

    code = "no_sign_change"

    def __init__(self, message, endpoints=()):
        self.endpoints = tuple(endpoints)
        super().__init__(message)


class MaxIterations(SolverError):
    code = "max_iterations"


class HypothesisViolation(SolverError):
    code = "hypothesis_violation"

    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__("; ".join(self.failures))


class ConvergenceFailure(SolverError):
    code = "convergence_failure"

    def __init__(self, message, estimate=float("nan")):
        self.estimate = estimate
        super().__init__(message)


class MonotonicityViolation(SolverError):
    code = "monotonicity_violation"

    def __init__(self, message, pair=None):
        self.pair = pair
        super().__init__(message)


class SimulationOverflow(SolverError):
    code = "simulation_overflow"
