"""Exception types shared across the package.

Every error raised by the library derives from FactorChainError so callers
(and the CLI) can distinguish input/validation problems from genuine bugs.
"""

from __future__ import annotations


class FactorChainError(Exception):
    """Base class for all errors raised by this package."""


class NonSymmetricError(FactorChainError):
    """Conflicting duplicate entries, or an asymmetric input matrix."""


class NonFiniteError(FactorChainError):
    """An input contains NaN or infinity."""


class NotSddError(FactorChainError):
    """Matrix is not symmetric diagonally dominant with strict dominance."""


class NotSddmError(FactorChainError):
    """Matrix is not SDDM (strictly dominant with nonpositive off-diagonals)."""


class DimensionMismatchError(FactorChainError):
    """Operand shapes are incompatible."""


class NotPositiveDefiniteError(FactorChainError):
    """A positive definite matrix was required."""


class NoConvergenceError(FactorChainError):
    """An iterative estimate failed to reach tolerance.

    The best estimate found so far is carried in ``best``.
    """

    def __init__(self, message: str, best: float | None = None):
        super().__init__(message)
        self.best = best


class ChainDivergedError(FactorChainError):
    """Chain construction made no progress; the sparsifier budget is too loose."""


class SpectrumEstimateFailedError(FactorChainError):
    """Power-iteration bounds for a refinement spectrum are inconsistent."""


class WrongExponentError(FactorChainError):
    """An operation requires a factor built for a different exponent."""


class TooLargeForDenseCheckError(FactorChainError):
    """Instance exceeds the dense-oracle size threshold."""


class InvalidParamsError(FactorChainError):
    """Command or generator parameters are out of range."""


class SerializationError(FactorChainError):
    """A factor container file is malformed or of an unsupported version."""
