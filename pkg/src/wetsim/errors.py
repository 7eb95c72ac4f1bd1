"""Exception hierarchy shared by all wetsim modules."""


class WetsimError(Exception):
    """Base class for library errors."""


class DomainError(WetsimError, ValueError):
    """Argument outside the mathematical domain of a function."""


class ValidationError(WetsimError, ValueError):
    """Parameter violates a modelling constraint (bounds, ordering, ...)."""


class NotPSDError(ValidationError):
    """Correlation matrix is not positive semidefinite."""


class CapabilityError(WetsimError, NotImplementedError):
    """Requested quantity has no supported analytic route."""


class ConvergenceError(WetsimError, ArithmeticError):
    """Numerical integration or series evaluation did not converge."""


class ConfigError(ValidationError):
    """Configuration document is malformed; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
