"""Exception hierarchy for the planner.

Every error raised by the library derives from PlannerError so callers
(and the CLI exit-code mapping) can distinguish input problems from
infeasibility and from internal inconsistencies.
"""


class PlannerError(Exception):
    """Base class for all planner errors."""


class InvalidProfileError(PlannerError):
    """Model profile violates its structural invariants."""


class CurveFitError(PlannerError):
    """A regression could not be fit; carries the offending curve name."""

    def __init__(self, curve: str, message: str):
        self.curve = curve
        super().__init__(f"fit failure for curve '{curve}': {message}")


class UndefinedCoefficientError(PlannerError):
    """Determination coefficient is undefined (zero variance in truth)."""


class DomainError(PlannerError):
    """An argument lies outside the mathematical domain of an operation."""


class InfeasibleTargetError(PlannerError):
    """Target latency is at or below a client's server-independent floor."""


class InfeasibleAllocationError(PlannerError):
    """No consistent group split exists; carries per-candidate diagnostics."""

    def __init__(self, message: str, diagnostics: list | None = None):
        self.diagnostics = diagnostics or []
        super().__init__(message)


class ScenarioError(PlannerError):
    """Scenario file is missing, malformed, or fails validation."""


class PlanMismatchError(PlannerError):
    """A plan is inconsistent with the scenario it is replayed against."""


class SimulationError(PlannerError):
    """Round replay cannot proceed (incomplete plan, event cap exceeded)."""
