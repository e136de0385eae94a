"""Exception hierarchy shared by all catbell modules."""


class CatBellError(Exception):
    """Base class for every error raised by catbell."""


class DomainError(CatBellError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class SizeError(CatBellError, ValueError):
    """A register or subset sum is too large to be represented densely."""


class TruncationError(CatBellError):
    """A Fock-space truncation discards more weight than allowed."""


class ZeroStateError(CatBellError):
    """An operator annihilated the state (norm underflow)."""


class ZeroProbabilityError(CatBellError):
    """A measurement outcome has (numerically) zero probability."""


class EncodingError(CatBellError, ValueError):
    """The state does not carry the registers required by the encoding."""


class RegimeError(CatBellError, ValueError):
    """A closed-form approximation is used outside its validity regime."""


class ConvergenceError(CatBellError, RuntimeError):
    """An iterative solver failed to converge."""
