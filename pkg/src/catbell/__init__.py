"""Simulation and error analysis of parallel Bell-pair generation with phase and hybrid cat qudits."""
from .errors import (
    CatBellError,
    ConvergenceError,
    DomainError,
    EncodingError,
    RegimeError,
    SizeError,
    TruncationError,
    ZeroProbabilityError,
    ZeroStateError,
)

__version__ = "0.1.0"

__all__ = [
    "CatBellError",
    "ConvergenceError",
    "DomainError",
    "EncodingError",
    "RegimeError",
    "SizeError",
    "TruncationError",
    "ZeroProbabilityError",
    "ZeroStateError",
    "__version__",
]
