"""Exception types shared across the package."""


class SolspecError(Exception):
    """Base class for all package errors."""


class PrimeMismatchError(SolspecError, ValueError):
    """Operands live over different primes."""


class DomainError(SolspecError, ValueError):
    """An element is outside the domain of a restricted structure."""


class ContextMismatchError(SolspecError, ValueError):
    """Algebra elements carry different multiplier parameters."""


class ResourceCapError(SolspecError, RuntimeError):
    """A configured size limit would be exceeded; raised before allocating."""

    def __init__(self, what, requested, cap):
        self.what = what
        self.requested = requested
        self.cap = cap
        super().__init__(f"{what}: {requested} exceeds cap {cap}")


class ConvergenceError(SolspecError, RuntimeError):
    """An iterative method hit its iteration limit."""


class ConfigError(SolspecError, ValueError):
    """Invalid run configuration."""
