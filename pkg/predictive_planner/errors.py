"""
Exception types raised across the behavior-planning toolkit.

Every error derives from :class:`PlannerError` and from the closest builtin
exception, so callers can catch either the domain type or the builtin. The
command-line interface maps these families onto process exit codes.

Example:
    >>> from predictive_planner.errors import DegeneratePath
    >>> try:
    ...     build_reference_path([(0, 0), (0, 0)], 10.0)
    ... except ValueError as e:
    ...     print(type(e).__name__)
    DegeneratePath
"""


class PlannerError(Exception):
    """Base class for all errors raised by the toolkit."""


class GeometryError(PlannerError, ValueError):
    """Raised when a reference path or Frenet conversion cannot be computed."""


class DegeneratePath(GeometryError):
    """The polyline is too short or collapses after removing duplicate points."""


class ProjectionOutOfRange(GeometryError):
    """A point lies outside the lateral corridor or beyond the ends of a path."""


class CurvatureSingularity(GeometryError):
    """The lateral offset reaches the path's radius of curvature (|d * kappa| >= 1)."""


class SingularSystem(PlannerError, ArithmeticError):
    """A polynomial boundary-condition system could not be solved."""


class NoValidProposal(PlannerError, RuntimeError):
    """Every candidate trajectory was rejected during generation."""


class PredictionError(PlannerError, ValueError):
    """Base class for prediction backend errors."""


class MissingParams(PredictionError):
    """The requested backend needs inputs (learned parameters, ground truth) that were not given."""


class ShapeMismatch(PredictionError):
    """Learned parameters do not match the predictor configuration."""


class NonFiniteLoss(PlannerError, FloatingPointError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, message: str, step: int = -1, loss: float = float('nan')):
        super().__init__(message)
        self.step = step
        self.loss = loss


class DegenerateScenario(PlannerError, ValueError):
    """An IRL training sample has fewer than two proposals or an invalid label."""


class DataError(PlannerError, ValueError):
    """Base class for scenario data errors."""


class ParseError(DataError):
    """A scenario record is not valid JSON."""

    def __init__(self, message: str, record_index: int = -1):
        super().__init__(message)
        self.record_index = record_index


class ScenarioValidationError(DataError):
    """A scenario record parsed but violates the scenario schema or invariants."""

    def __init__(self, message: str, record_index: int = -1):
        super().__init__(message)
        self.record_index = record_index


class TooShort(DataError):
    """A raw track set is too short to hold a single history+future window."""
