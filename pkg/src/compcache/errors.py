class CompCacheError(Exception):
    """Base class for package errors."""


class DomainError(CompCacheError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ApproximationDomainError(DomainError):
    """Continuous popularity approximation requested where it does not hold."""


class DivergenceError(DomainError):
    """Interference integral does not converge (pathloss exponent <= 2)."""


class ConfigError(CompCacheError, ValueError):
    """Malformed or invalid configuration."""


class PreconditionWarning(UserWarning):
    """A numerical precondition is violated and a fallback was used."""
