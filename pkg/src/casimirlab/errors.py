"""Exception and warning types shared across the package."""


class ValidationError(ValueError):
    """Invalid input data or parameters (CLI exit code 1)."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to reach its tolerance (CLI exit code 2)."""


class IncompleteSpectrumError(ValidationError):
    """A tabulated spectrum lacks a tail needed to close an integral."""


class DivergentStaticPermittivityError(ValidationError):
    """epsilon(i*xi) diverges at xi=0 for this model; use its static classification."""


class TruncationWarning(UserWarning):
    """A series was cut at its cap; the result includes a tail estimate."""
