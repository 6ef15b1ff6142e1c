"""Exception types shared across the package."""


class BeamformingError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(BeamformingError):
    """Operands have incompatible shapes."""


class NotPositiveDefinite(BeamformingError):
    """A matrix required to be positive definite failed its pivot test."""


class NonPositiveDistance(BeamformingError):
    """A propagation distance must be strictly positive."""


class SeparationInfeasible(BeamformingError):
    """The angular sector cannot host the requested directions at the
    required minimum separation."""


class FormatError(BeamformingError):
    """A persisted file is malformed; the message carries the offending
    field path."""


class ZeroCombiner(BeamformingError):
    """A receive combiner column is exactly zero."""


class ZeroTheta(BeamformingError):
    """A sensing auxiliary row vanished, so the combiner update is undefined."""


class MissingCheckpoint(BeamformingError):
    """An experiment needs trained parameters but none were supplied."""


class ScheduleMismatch(BeamformingError):
    """Loaded parameters do not fit the solver's layer schedule."""


class NonFiniteError(BeamformingError):
    """An iterate contained NaN or Inf; carries the trace collected so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
