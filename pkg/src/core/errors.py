"""
Exception hierarchy for the rank collapse lab.

Every error raised by the library derives from RankLabError so that drivers
can map failures onto exit codes in one place.
"""

from typing import Optional, Any


class RankLabError(Exception):
    """Base class for all library errors"""


# =============================================================================
# LINEAR ALGEBRA
# =============================================================================

class LinalgError(RankLabError):
    """Failures of the dense matrix kernels"""


class ShapeMismatch(LinalgError, ValueError):
    """Operand shapes do not conform"""


class ZeroRow(LinalgError):
    """A row is too small to normalize"""

    def __init__(self, message: str, row: Optional[int] = None,
                 layer: Optional[int] = None, partial_trace: Any = None):
        super().__init__(message)
        self.row = row
        self.layer = layer
        self.partial_trace = partial_trace


class NonFinite(LinalgError):
    """An entry overflowed or became NaN"""

    def __init__(self, message: str, layer: Optional[int] = None, partial_trace: Any = None):
        super().__init__(message)
        self.layer = layer
        self.partial_trace = partial_trace


class NoConvergence(LinalgError):
    """Jacobi sweeps exceeded the iteration cap"""


class NotSymmetric(LinalgError, ValueError):
    """Input to a symmetric routine is not symmetric"""


class ZeroMatrix(LinalgError):
    """Operation undefined for the all-zero matrix"""


# =============================================================================
# SPECIFICATIONS AND CONFIGURATION
# =============================================================================

class SpecError(RankLabError, ValueError):
    """A mixing, layer or model specification is invalid"""


class ConfigurationError(RankLabError, ValueError):
    """Run configuration is invalid"""


# =============================================================================
# BOUNDS
# =============================================================================

class BoundError(RankLabError):
    """A closed-form bound cannot be evaluated"""


class Infeasible(BoundError):
    """No lambda satisfies the collapse-avoidance condition"""


class MarginNotPositive(BoundError):
    """Input floor requested where the feasibility margin is not positive"""


class BaseOutOfRange(BoundError):
    """Geometric base of a decay bound is outside (0, 1)"""


# =============================================================================
# ORACLES
# =============================================================================

class OracleError(RankLabError):
    """Closed-form counterexample cannot be evaluated"""


class LambdaSingular(OracleError, SpecError):
    """lambda = -1 makes the counterexample system singular"""


class DomainError(OracleError):
    """Recurrence evaluated outside its domain"""


class DegenerateNorm(OracleError):
    """Closed-form row has zero norm"""


__all__ = [
    'RankLabError',
    'LinalgError',
    'ShapeMismatch',
    'ZeroRow',
    'NonFinite',
    'NoConvergence',
    'NotSymmetric',
    'ZeroMatrix',
    'SpecError',
    'ConfigurationError',
    'BoundError',
    'Infeasible',
    'MarginNotPositive',
    'BaseOutOfRange',
    'OracleError',
    'LambdaSingular',
    'DomainError',
    'DegenerateNorm',
]
