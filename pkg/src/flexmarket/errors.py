"""Exception types shared across the package."""


class FlexmarketError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(FlexmarketError):
    """The input document is not well formed (bad JSON, wrong shape, bad types)."""


class ValidationError(FlexmarketError):
    """A structurally well-formed input violates a domain invariant."""


class NotCanonical(FlexmarketError):
    """Supply profile is not nonincreasing within every segment."""


class NonIntegerInput(FlexmarketError):
    """A flow operation received non-integer supply or a non-unit load weight."""


class TensorSizeError(FlexmarketError):
    """The requested tensor would exceed the dense-storage size guard."""


class NotAdequate(FlexmarketError):
    """Allocation was requested for an instance whose supply cannot meet demand.

    Carries the certifying minimum cut as ``witness``.
    """

    def __init__(self, message, witness):
        super().__init__(message)
        self.witness = witness


class SolverFailure(FlexmarketError):
    """The LP solver hit its iteration cap or detected an unbounded model."""
