"""Exception hierarchy shared by every flowobs module."""


class FlowObsError(Exception):
    """Base class for all flowobs errors."""


class DomainError(FlowObsError, ValueError):
    """An input lies outside the domain of an operation."""


class ConfigError(FlowObsError, ValueError):
    """A configuration value or file is invalid."""


class IntegrationError(FlowObsError, ArithmeticError):
    """A time integration produced a non-finite state."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class SynthesisError(FlowObsError):
    """The gain-synthesis LMI program has no certified solution."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class NumericalError(FlowObsError, ArithmeticError):
    """An iterative solver stalled or lost numerical accuracy."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class VerificationError(FlowObsError):
    """A synthesized gain failed an independent certificate check."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class IngestionError(FlowObsError, ValueError):
    """A measurement stream or CSV file is malformed."""


class AlignmentError(FlowObsError, ValueError):
    """Two time series cannot be placed on a common time grid."""


class DimensionMismatchError(FlowObsError, ValueError):
    """Stored data does not match the dimensions implied by a configuration."""
