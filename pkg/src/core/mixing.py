"""
Mixing matrices for the four block families.

Every block is written as O = M V: attention builds a row-stochastic M from
query/key scores, the SSM families build lower-triangular M from decays and
input/output projections. Scalar-mixing convention throughout: M is N x N and
acts identically on all d channels.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from src.core.errors import ShapeMismatch, SpecError
from src.core.linalg import (
    frobenius_norm,
    row_softmax,
    row_sum_norm,
    singular_extremes,
    spectral_norm,
)


class MixingKind(Enum):
    """Block families sharing the unified recursion"""
    ATTENTION = "attention"
    LTI_SCALAR = "lti"
    STRUCTURED_LTI = "structured"
    SELECTIVE = "selective"

    @property
    def input_dependent(self) -> bool:
        return self in (MixingKind.ATTENTION, MixingKind.SELECTIVE)


Decay = Union[float, np.ndarray]


@dataclass(frozen=True, eq=False)
class MixingSpec:
    """Which block builds M, plus its weights"""
    kind: MixingKind
    # Attention
    w_q: Optional[np.ndarray] = None
    w_k: Optional[np.ndarray] = None
    w_v: Optional[np.ndarray] = None
    d_qk: float = 1.0
    # Scalar LTI
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    # Structured LTI (vector) and selective (scalar or per-step vector)
    alpha: Optional[Decay] = None
    w_c: Optional[np.ndarray] = None
    w_b: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind is MixingKind.ATTENTION:
            if self.w_q is None or self.w_k is None:
                raise SpecError("attention requires W_Q and W_K")
            if self.d_qk <= 0:
                raise SpecError(f"d_QK must be positive, got {self.d_qk}")
            if self.w_q.shape != self.w_k.shape:
                raise ShapeMismatch(f"W_Q {self.w_q.shape} and W_K {self.w_k.shape} differ")
        elif self.kind in (MixingKind.STRUCTURED_LTI, MixingKind.SELECTIVE):
            if self.w_c is None or self.w_b is None or self.alpha is None:
                raise SpecError(f"{self.kind.value} requires alpha, W_C and W_B")
            if self.w_c.shape != self.w_b.shape:
                raise ShapeMismatch(f"W_C {self.w_c.shape} and W_B {self.w_b.shape} differ")

    # Constructors -----------------------------------------------------------

    @classmethod
    def attention(cls, w_q: np.ndarray, w_k: np.ndarray, w_v: Optional[np.ndarray] = None,
                  d_qk: Optional[float] = None) -> 'MixingSpec':
        return cls(kind=MixingKind.ATTENTION, w_q=np.asarray(w_q, dtype=float),
                   w_k=np.asarray(w_k, dtype=float),
                   w_v=None if w_v is None else np.asarray(w_v, dtype=float),
                   d_qk=float(np.shape(w_q)[1] if d_qk is None else d_qk))

    @classmethod
    def lti_scalar(cls, a: float, b: float, c: float) -> 'MixingSpec':
        return cls(kind=MixingKind.LTI_SCALAR, a=float(a), b=float(b), c=float(c))

    @classmethod
    def structured_lti(cls, alpha, w_c: np.ndarray, w_b: np.ndarray) -> 'MixingSpec':
        return cls(kind=MixingKind.STRUCTURED_LTI, alpha=np.asarray(alpha, dtype=float).ravel(),
                   w_c=np.asarray(w_c, dtype=float), w_b=np.asarray(w_b, dtype=float))

    @classmethod
    def selective(cls, alpha: Decay, w_b: np.ndarray, w_c: np.ndarray) -> 'MixingSpec':
        decay = float(alpha) if np.ndim(alpha) == 0 else np.asarray(alpha, dtype=float).ravel()
        return cls(kind=MixingKind.SELECTIVE, alpha=decay,
                   w_c=np.asarray(w_c, dtype=float), w_b=np.asarray(w_b, dtype=float))

    # Helpers ----------------------------------------------------------------

    def decay_vector(self, n: int) -> np.ndarray:
        """Per-step decays of length N-1 (selective scalars are broadcast)"""
        if np.ndim(self.alpha) == 0:
            return np.full(max(n - 1, 0), float(self.alpha))
        alpha = np.asarray(self.alpha, dtype=float)
        if alpha.shape != (max(n - 1, 0),):
            raise ShapeMismatch(f"decay vector has length {alpha.size}, need {n - 1}")
        return alpha

    def kernel(self) -> np.ndarray:
        """W_C W_B^T"""
        return self.w_c @ self.w_b.T


def one_ss(alpha) -> np.ndarray:
    """
    Lower-triangular 1-semiseparable matrix.

    Entry (j, i), j >= i, is alpha_i * ... * alpha_{j-1}; the diagonal is 1.
    """
    alpha = np.asarray(alpha, dtype=np.float64).ravel()
    n = alpha.size + 1
    m = np.zeros((n, n))
    m[0, 0] = 1.0
    for j in range(1, n):
        m[j, :j] = m[j - 1, :j] * alpha[j - 1]
        m[j, j] = 1.0
    return m


def attention_mixing(x: np.ndarray, spec: MixingSpec) -> np.ndarray:
    if spec.kind is not MixingKind.ATTENTION:
        raise SpecError(f"attention_mixing called with {spec.kind.value} spec")
    if x.shape[1] != spec.w_q.shape[0]:
        raise ShapeMismatch(f"X has {x.shape[1]} features, W_Q expects {spec.w_q.shape[0]}")
    scores = (x @ spec.w_q) @ (x @ spec.w_k).T / np.sqrt(spec.d_qk)
    return row_softmax(scores)


def lti_mixing(spec: MixingSpec, n: int) -> np.ndarray:
    """M_ji = C A^(j-i) B for j >= i"""
    if spec.kind is not MixingKind.LTI_SCALAR:
        raise SpecError(f"lti_mixing called with {spec.kind.value} spec")
    lag = np.subtract.outer(np.arange(n), np.arange(n))
    lower = lag >= 0
    powers = np.power(spec.a, np.where(lower, lag, 0))
    return np.where(lower, spec.c * powers * spec.b, 0.0)


def structured_lti_mixing(spec: MixingSpec, n: int) -> np.ndarray:
    if spec.kind is not MixingKind.STRUCTURED_LTI:
        raise SpecError(f"structured_lti_mixing called with {spec.kind.value} spec")
    if spec.w_c.shape[0] != n:
        raise ShapeMismatch(f"W_C has {spec.w_c.shape[0]} rows, sequence length is {n}")
    return one_ss(spec.decay_vector(n)) * spec.kernel()


def selective_mixing(y: np.ndarray, spec: MixingSpec) -> np.ndarray:
    """M = 1SS(alpha) * (Y W_C W_B^T Y^T); rebuilt from the current input"""
    if spec.kind is not MixingKind.SELECTIVE:
        raise SpecError(f"selective_mixing called with {spec.kind.value} spec")
    if y.shape[1] != spec.w_c.shape[0]:
        raise ShapeMismatch(f"Y has {y.shape[1]} features, W_C expects {spec.w_c.shape[0]}")
    gram = (y @ spec.w_c) @ (y @ spec.w_b).T
    return one_ss(spec.decay_vector(y.shape[0])) * gram


def build_mixing(y: np.ndarray, spec: MixingSpec) -> np.ndarray:
    """Dispatch to the builder for spec.kind"""
    n = y.shape[0]
    if spec.kind is MixingKind.ATTENTION:
        return attention_mixing(y, spec)
    if spec.kind is MixingKind.LTI_SCALAR:
        return lti_mixing(spec, n)
    if spec.kind is MixingKind.STRUCTURED_LTI:
        return structured_lti_mixing(spec, n)
    return selective_mixing(y, spec)


def _silu(z: np.ndarray) -> np.ndarray:
    # tanh form of the logistic function does not overflow
    return z * 0.5 * (1.0 + np.tanh(0.5 * z))


def apply_gating(o: np.ndarray, x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """O * silu(X W)"""
    if x.shape[1] != w.shape[0] or o.shape != (x.shape[0], w.shape[1]):
        raise ShapeMismatch(f"gating shapes O {o.shape}, X {x.shape}, W {w.shape} do not conform")
    return o * _silu(x @ w)


def c_m_constant(spec: MixingSpec, n: int) -> float:
    """Operative C_M constant in the form the theory states it"""
    if spec.kind is MixingKind.ATTENTION:
        return float(np.sqrt(n))
    if spec.kind is MixingKind.LTI_SCALAR:
        return abs(spec.a) * abs(spec.b) * abs(spec.c)
    if spec.kind is MixingKind.STRUCTURED_LTI:
        decay = float(np.max(np.abs(spec.alpha))) if spec.alpha.size else 0.0
        return decay * spectral_norm(spec.w_b) * frobenius_norm(spec.w_c)
    return singular_extremes(spec.w_b)[1] * frobenius_norm(spec.w_c)


def c_m_supremum(spec: MixingSpec, n: int) -> float:
    """
    Upper bound on max(||M||_F, ||M||_inf) over all unit-row inputs.

    This is the constant under which the per-layer recursion floor is sound:
    the row-norm step of its derivation needs the absolute row sum as well.
    """
    if spec.kind is MixingKind.ATTENTION:
        return float(np.sqrt(n))
    if spec.kind is MixingKind.LTI_SCALAR:
        m = lti_mixing(spec, n)
        return max(frobenius_norm(m), row_sum_norm(m))
    if spec.kind is MixingKind.STRUCTURED_LTI:
        m = structured_lti_mixing(spec, n)
        return max(frobenius_norm(m), row_sum_norm(m))
    envelope = one_ss(np.abs(spec.decay_vector(n)))
    return spectral_norm(spec.kernel()) * max(frobenius_norm(envelope), row_sum_norm(envelope))


__all__ = [
    'MixingKind',
    'MixingSpec',
    'one_ss',
    'attention_mixing',
    'lti_mixing',
    'structured_lti_mixing',
    'selective_mixing',
    'build_mixing',
    'apply_gating',
    'c_m_constant',
    'c_m_supremum',
]
