"""
Rank-collapse measures and token-geometry statistics.
"""

from dataclasses import dataclass, asdict
from typing import Dict

import numpy as np

from src.core.errors import ZeroMatrix
from src.core.linalg import frobenius_norm, jacobi_svd


@dataclass(frozen=True)
class MetricSample:
    """Collapse statistics of one layer output"""
    mu: float
    normalized_mu: float
    phi: float
    y_frob: float

    @classmethod
    def from_matrix(cls, y: np.ndarray) -> 'MetricSample':
        with np.errstate(over='ignore', invalid='ignore'):
            m = mu(y)
        frob = frobenius_norm(y)
        return cls(
            mu=m,
            normalized_mu=m / frob if frob > 0 else 0.0,
            phi=phi(y),
            y_frob=frob,
        )

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite([self.mu, self.normalized_mu, self.phi, self.y_frob])))

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def residual(y: np.ndarray) -> np.ndarray:
    """Y - 1 gamma_Y with gamma_Y the column-mean row"""
    return y - np.mean(y, axis=0, keepdims=True)


def mu(y: np.ndarray) -> float:
    return frobenius_norm(residual(y))


def normalized_mu(y: np.ndarray) -> float:
    frob = frobenius_norm(y)
    if frob == 0.0:
        raise ZeroMatrix("normalized mu is undefined for the zero matrix")
    return mu(y) / frob


def phi(y: np.ndarray) -> float:
    """Smallest row inner product over all ordered pairs, i = j included"""
    # s^2 * min((y/s)(y/s)^T) keeps the Gram product finite for entries near 1e160
    scale = float(np.max(np.abs(y))) if y.size else 0.0
    if scale == 0.0 or not np.isfinite(scale):
        return scale
    z = y / scale
    with np.errstate(over='ignore'):
        return float(scale * (scale * np.min(z @ z.T)))


def pairwise_mean_sq_distance(y: np.ndarray) -> float:
    """(1 / 2N) * sum over i, j of ||y_i - y_j||^2"""
    diff = y[:, None, :] - y[None, :, :]
    return float(np.sum(np.square(diff)) / (2.0 * y.shape[0]))


def effective_rank(y: np.ndarray) -> float:
    """exp of the entropy of the normalized singular values; 0 for the zero matrix"""
    _, s, _ = jacobi_svd(y)
    total = float(np.sum(s))
    if total == 0.0:
        return 0.0
    p = s[s > 0] / total
    return float(np.exp(-np.sum(p * np.log(p))))


__all__ = [
    'MetricSample',
    'residual',
    'mu',
    'normalized_mu',
    'phi',
    'pairwise_mean_sq_distance',
    'effective_rank',
]
