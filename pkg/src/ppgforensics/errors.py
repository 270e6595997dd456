"""Exception and warning types shared across the package."""


class PpgForensicsError(Exception):
    """Base class for all package errors."""


class IngestError(PpgForensicsError):
    """Raised when frames, landmarks or trace files cannot be loaded."""


class DimensionMismatchError(IngestError):
    pass


class RegionUnavailableError(PpgForensicsError):
    """A facial region has no usable pixels (missing landmarks, empty polygon)."""


class TriangulationError(PpgForensicsError):
    pass


class ParameterError(PpgForensicsError, ValueError):
    """Invalid configuration or argument value."""


class SegmentTooShortError(PpgForensicsError):
    def __init__(self, required, actual):
        self.required = required
        self.actual = actual
        super().__init__(f"sequence too short: need {required} frames, got {actual}")


class SignalError(PpgForensicsError):
    """Non-finite or otherwise unusable signal."""


class UndecidableError(PpgForensicsError):
    """A pairwise comparison could not pick a synthetic member."""


class ModelError(PpgForensicsError):
    pass


class StageError(PpgForensicsError):
    """Wraps an error raised inside one pipeline stage for one input."""

    def __init__(self, stage, input_id, cause):
        self.stage = stage
        self.input_id = input_id
        self.cause = cause
        super().__init__(f"[{stage}] {input_id}: {cause}")


class DegenerateInputWarning(UserWarning):
    """Input was degenerate (zero/constant signal, padding applied, ...).

    Results stay finite; callers that need to know can record these
    with ``warnings.catch_warnings(record=True)``.
    """
