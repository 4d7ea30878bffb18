"""Named error types shared across the package.

Every error carries a stable ``name`` so the command line can print a
machine-readable identifier.
"""


class SparseDoaError(Exception):
    """Base class for all package errors."""

    @property
    def name(self) -> str:
        return type(self).__name__


class BadParam(SparseDoaError, ValueError):
    pass


class NotCoprime(BadParam):
    pass


class TheoremOutOfRange(BadParam):
    pass


class EmptyArray(BadParam):
    pass


class NoClosedForm(SparseDoaError, LookupError):
    pass


class NoConfigExists(SparseDoaError, LookupError):
    pass


class DimensionMismatch(SparseDoaError, ValueError):
    pass


class InfeasibleEpsilon(SparseDoaError, ValueError):
    pass


class ConfigError(SparseDoaError, ValueError):
    """Raised with the full list of problems found in a config."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
