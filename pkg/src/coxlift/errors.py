"""Exception hierarchy shared by all coxlift modules."""


class CoxliftError(Exception):
    """Base class for all errors raised by this package."""


class InputDataError(CoxliftError):
    """Malformed or inconsistent input data (schema, names, declared facts)."""


class NotHomogeneousError(CoxliftError):
    """An element mixes terms of different degrees."""


class RewriteDivergedError(CoxliftError):
    """Normal-form rewriting exceeded the configured step cap."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = tuple(trace)


class FactorizationOracleRequired(CoxliftError):
    """No backend can factor the element; a declared factorization is needed."""


class LiftInconsistencyError(CoxliftError):
    """The lift run detected inconsistent factorization or degree data."""


class InternalInvariantError(CoxliftError):
    """An internal invariant was violated; indicates a bug, not bad input."""
