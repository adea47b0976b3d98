"""Exception taxonomy shared across the package."""


class QRNGError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(QRNGError, ValueError):
    """An argument is outside its documented domain."""


class UnsupportedConfigError(QRNGError):
    """The requested operation has no closed form for this configuration."""


class FitFailureError(QRNGError):
    """Curve fit did not converge. Carries the best parameters seen so far."""

    def __init__(self, message, best_fit=None):
        super().__init__(message)
        self.best_fit = best_fit


class InsufficientDataError(QRNGError):
    """Too few points remain to fit (or rejection would remove too many)."""


class OutputTooShortError(QRNGError):
    """Extractor sizing produced a non-positive output length."""


class UnreachableTargetError(QRNGError):
    """Requested operating point exceeds the curve's asymptote."""


class TooShortInputError(QRNGError):
    """Bit stream is shorter than the statistical test requires."""


class UndefinedVarianceError(QRNGError):
    """Autocorrelation of a constant stream is undefined."""


class FileFormatError(QRNGError):
    """A bit stream file is malformed or has an unsupported version."""
