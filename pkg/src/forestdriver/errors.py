"""Exception hierarchy shared by every module.

All errors derive from :class:`ForestDriverError` so the CLI can turn any of
them into a machine-readable error record.
"""


class ForestDriverError(Exception):
    """Base class for all package errors."""


class ValidationError(ForestDriverError, ValueError):
    """An input violates a documented precondition or invariant."""

    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = list(offending or [])


# raster-core
class DegenerateGeometry(ValidationError):
    pass


class EmptyRegion(ForestDriverError):
    pass


class CropTooLarge(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


# ingest
class UnknownCategory(ValidationError):
    pass


class ManifestError(ForestDriverError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


# composite
class NoScenes(ForestDriverError):
    pass


class MissingBand(ForestDriverError):
    pass


# features
class MissingPredictor(ForestDriverError):
    pass


class FeatureError(ForestDriverError):
    pass


# baselines
class FoldError(ForestDriverError):
    pass


# model
class ShapeError(ValidationError):
    pass


class NumericalError(ForestDriverError):
    def __init__(self, message, parameter=None):
        super().__init__(message)
        self.parameter = parameter


class TrainingError(ForestDriverError):
    pass


class TruncatedRegion(ForestDriverError):
    pass


# eval
class EvalError(ForestDriverError):
    pass
