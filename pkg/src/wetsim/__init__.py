"""Analysis and simulation of CSI-free multi-antenna wireless energy transfer."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CapabilityError,
    ConfigError,
    ConvergenceError,
    DomainError,
    NotPSDError,
    ValidationError,
    WetsimError,
)
from .strategies import Strategy  # noqa: E402

__all__ = [
    "CapabilityError",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "NotPSDError",
    "Strategy",
    "ValidationError",
    "WetsimError",
    "__version__",
]
