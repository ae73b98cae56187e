"""Exception hierarchy shared across the package."""


class NoiseSearchError(Exception):
    """Base class for all package errors."""


class ShapeError(NoiseSearchError):
    """Invalid tensor shape or element-count mismatch."""


class DegenerateInputError(NoiseSearchError):
    """Operation undefined for (near-)constant input."""


class NumericError(NoiseSearchError):
    """Non-finite values encountered during a computation."""


class TimeDomainError(NoiseSearchError):
    """Flow time outside the valid (0, 1] domain."""


class ConfigError(NoiseSearchError):
    """Invalid search or experiment configuration."""


class TransportError(NoiseSearchError):
    """External verifier protocol failure.

    Carries the raw offending payload (if any) for diagnosis.
    """

    def __init__(self, message: str, payload: str | None = None):
        super().__init__(message)
        self.payload = payload
