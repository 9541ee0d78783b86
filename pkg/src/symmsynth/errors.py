"""Exception types shared across the package."""


class SymmSynthError(Exception):
    """Base class for all package errors."""


class ZeroVector(SymmSynthError):
    """A unit direction was requested for a zero-norm vector."""


class DimensionMismatch(SymmSynthError):
    """Operands have incompatible dimensions."""


class InvalidShape(SymmSynthError):
    """An array does not have the expected shape or content."""


class SameClass(SymmSynthError):
    """Negative-pair enumeration was asked for two groups of the same class."""


class RankOutOfRange(SymmSynthError):
    """Top-k rank outside the candidate count."""


class EmptyStats(SymmSynthError):
    """Selection statistics with zero recorded selections."""


class NoPositivePairs(SymmSynthError):
    """Batch contains no same-class pair."""


class NoNegatives(SymmSynthError):
    """Batch contains no cross-class pair where one is required."""


class NotNormalized(SymmSynthError):
    """Batch normalization state violates the loss family convention."""


class TieDetected(SymmSynthError):
    """Finite-difference check could not find a batch away from tie boundaries."""


class InsufficientClasses(SymmSynthError):
    """Dataset does not contain enough classes for the requested batch."""


class ParseError(SymmSynthError):
    """Malformed dataset or checkpoint file."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            loc = f"line {line}" + (f", column {column}" if column is not None else "")
            message = f"{message} ({loc})"
        super().__init__(message)
        self.line = line
        self.column = column


class ClassTooSmall(SymmSynthError):
    """A dataset class has fewer than two samples."""


class InvalidFraction(SymmSynthError):
    """Class split fraction would leave an empty train or test side."""


class KTooLarge(SymmSynthError):
    """Requested neighborhood or cluster count exceeds the sample count."""


class LengthMismatch(SymmSynthError):
    """Paired sequences have different lengths."""


class NonFiniteLoss(SymmSynthError):
    """Training produced a NaN or infinite loss value."""

    def __init__(self, message, iteration=None, diagnostics=None):
        super().__init__(message)
        self.iteration = iteration
        self.diagnostics = diagnostics or {}


class ConfigError(SymmSynthError):
    """Inconsistent or out-of-range configuration."""
