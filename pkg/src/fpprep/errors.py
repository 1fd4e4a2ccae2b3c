"""Exception hierarchy shared by every module."""


class FpprepError(Exception):
    """Base class for all library errors."""


class DomainError(FpprepError, ValueError):
    """Input outside the mathematical domain of an operation (NaN, inf, subnormal, ...)."""


class ContractError(FpprepError, ValueError):
    """A documented precondition was violated by the caller."""


class InvalidFieldError(ContractError):
    """A bit field passed to ``compose`` is out of range."""


class EmptyInputError(ContractError):
    pass


class UnsupportedInputError(FpprepError, ValueError):
    """Dataset contains values the transforms do not handle (negative, NaN, inf, subnormal)."""


class TransformError(FpprepError):
    """A forward transform could not be applied with the requested parameters."""


class CapacityError(TransformError):
    """The packed data does not fit the requested shared-bit window."""

    def __init__(self, message, max_feasible_d=None):
        super().__init__(message)
        self.max_feasible_d = max_feasible_d


class InfeasibleShiftError(TransformError):
    """No shift satisfying the losslessness predicate exists."""


class NonConvergenceError(TransformError):
    def __init__(self, message, max_feasible_d=None):
        super().__init__(message)
        self.max_feasible_d = max_feasible_d


class RangeExhaustedError(TransformError):
    """Iterating would push values past the largest finite exponent."""


class CheckFailedError(FpprepError, AssertionError):
    """A checked-mode invariant did not hold."""


class IntegrityError(FpprepError, ValueError):
    """Serialized data or metadata is corrupt."""


class BadMagicError(IntegrityError):
    pass


class TruncatedError(IntegrityError):
    pass


class LengthMismatchError(IntegrityError):
    pass


class UnknownTechniqueError(IntegrityError):
    pass


class IngestError(FpprepError, ValueError):
    """CSV input could not be turned into a dataset."""


class MissingColumnError(IngestError):
    pass


class CellParseError(IngestError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class ScopeError(IngestError):
    """Value outside the supported domain (negative or non-finite)."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class RoundTripError(FpprepError, AssertionError):
    """A preprocessed dataset did not invert to the original bits."""
