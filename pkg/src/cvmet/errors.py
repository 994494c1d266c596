"""Exception hierarchy shared by all cvmet modules.

Exit-code mapping used by the CLI: ValidationError -> 1, numerical
non-convergence (NonConvergenceError, LargeNGateError) -> 2, internal
contract violations -> 3.
"""


class CvmetError(Exception):
    """Base class for all package errors."""


class ValidationError(CvmetError):
    """Bad user input: malformed config, empty sweep, unknown field."""


class InvalidDimensionError(CvmetError):
    """Fock truncation too small for the requested operation."""


class ContractViolationError(CvmetError):
    """An internal invariant failed (norm drift, hermiticity loss, ...)."""


class TruncationLeakageError(CvmetError):
    """Probe preparation leaks more mass past the truncation than allowed."""


class EnvelopeError(CvmetError):
    """Occupation reached the truncation boundary; results not trustworthy.

    `offending_mass` carries the largest boundary occupation seen.
    """

    def __init__(self, message: str, offending_mass: float = float("nan")):
        super().__init__(message)
        self.offending_mass = offending_mass


class NonConvergenceError(CvmetError):
    """Dimension-doubling or step-refinement loop failed to settle."""


class UnsupportedConfigurationError(CvmetError):
    """The requested combination is outside the implemented scope."""


class UnidentifiableParameterError(CvmetError):
    """Fisher information or signal derivative vanished at this point."""


class LargeNGateError(CvmetError):
    """Asymptotic comparison requested outside its declared large-N regime."""


class DomainError(CvmetError):
    """Numeric input outside the mathematical domain (e.g. log of y <= 0)."""
