"""Exception types shared across the package."""


class BinutilError(Exception):
    """Base class for all package-specific errors."""


class DomainError(BinutilError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InvalidUtilityError(BinutilError, ValueError):
    """A custom utility specification fails validation."""


class UsageError(BinutilError, ValueError):
    """Inconsistent arguments at the API or CLI level, not a math-domain issue."""


class EvaluationError(BinutilError, RuntimeError):
    """A numerical routine could not produce a result within its contract."""
