"""
Dense small-matrix kernels and spectral extremes.

Matrices are 2-D float64 numpy arrays. The two spectral routines are Jacobi
iterations: one-sided (Hestenes) for singular values and cyclic for
symmetric eigenvalues. Both are accurate to high relative precision on the
tiny matrices this lab works with.
"""

from typing import Tuple

import numpy as np

from src.core.errors import (
    NoConvergence,
    NonFinite,
    NotSymmetric,
    ShapeMismatch,
    ZeroRow,
)

EPS_ROW = 1e-12
JACOBI_TOL = 1e-14
MAX_SWEEPS = 100
SYMMETRY_TOL = 1e-12
OVERFLOW_LIMIT = 1e308


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Validate and convert input to a finite 2-D float64 array"""
    m = np.asarray(x, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeMismatch(f"{name} must be a non-empty 2-D matrix, got shape {m.shape}")
    check_finite(m, name)
    return m


def check_finite(m: np.ndarray, name: str = "matrix") -> None:
    """Raise NonFinite if any entry is NaN, infinite or beyond the overflow limit"""
    if not np.all(np.isfinite(m)) or (m.size and np.max(np.abs(m)) > OVERFLOW_LIMIT):
        raise NonFinite(f"{name} has non-finite entries")


def frobenius_norm(m: np.ndarray) -> float:
    # scaled by the largest entry so squares of entries near 1e200 stay finite
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    if scale == 0.0 or not np.isfinite(scale):
        return scale
    return scale * float(np.sqrt(np.sum(np.square(m / scale))))


def row_sum_norm(m: np.ndarray) -> float:
    """Infinity norm: largest absolute row sum"""
    return float(np.max(np.sum(np.abs(m), axis=1)))


def row_softmax(m: np.ndarray) -> np.ndarray:
    shifted = m - np.max(m, axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=1, keepdims=True)


def row_normalize(m: np.ndarray) -> np.ndarray:
    """Divide each row by its Euclidean norm (normalization-only LayerNorm)"""
    return normalize_rows_with_scales(m)[0]


def normalize_rows_with_scales(m: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Row-normalize and also return the diagonal of D"""
    norms = np.sqrt(np.sum(np.square(m), axis=1))
    small = np.flatnonzero(norms <= EPS_ROW)
    if small.size:
        raise ZeroRow(f"row {int(small[0])} has norm {norms[small[0]]:.3e}", row=int(small[0]))
    scales = 1.0 / norms
    return m * scales[:, None], scales


def _rotation(alpha: float, beta: float, gamma: float) -> Tuple[float, float]:
    """Jacobi rotation (c, s) annihilating gamma in [[alpha, gamma], [gamma, beta]]"""
    zeta = (beta - alpha) / (2.0 * gamma)
    t = (1.0 if zeta >= 0 else -1.0) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
    c = 1.0 / np.sqrt(1.0 + t * t)
    return c, c * t


def jacobi_svd(m: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Thin SVD by one-sided Jacobi iteration.

    Returns (u, s, vt) with singular values in descending order. Columns of u
    belonging to zero singular values are left as zero vectors.
    """
    a = np.array(m, dtype=np.float64)
    transposed = a.shape[0] < a.shape[1]
    if transposed:
        a = a.T.copy()
    n = a.shape[1]
    v = np.eye(n)

    for _ in range(MAX_SWEEPS):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = float(a[:, p] @ a[:, p])
                beta = float(a[:, q] @ a[:, q])
                gamma = float(a[:, p] @ a[:, q])
                if gamma == 0.0 or abs(gamma) <= JACOBI_TOL * np.sqrt(alpha) * np.sqrt(beta):
                    continue
                rotated = True
                c, s = _rotation(alpha, beta, gamma)
                ap = a[:, p].copy()
                a[:, p] = c * ap - s * a[:, q]
                a[:, q] = s * ap + c * a[:, q]
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
        if not rotated:
            break
    else:
        raise NoConvergence(f"one-sided Jacobi did not converge in {MAX_SWEEPS} sweeps")

    sigma = np.sqrt(np.sum(np.square(a), axis=0))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    a = a[:, order]
    v = v[:, order]
    u = np.zeros_like(a)
    nonzero = sigma > 0
    u[:, nonzero] = a[:, nonzero] / sigma[nonzero]

    if transposed:
        return v, sigma, u.T
    return u, sigma, v.T


def singular_extremes(m: np.ndarray) -> Tuple[float, float]:
    """(sigma_min, sigma_max); sigma_max is the spectral norm"""
    _, s, _ = jacobi_svd(m)
    return float(s[-1]), float(s[0])


def spectral_norm(m: np.ndarray) -> float:
    return singular_extremes(m)[1]


def nearest_orthogonal(m: np.ndarray) -> np.ndarray:
    """Polar factor U V^T: the input with every singular value set to 1"""
    if m.shape[0] != m.shape[1]:
        raise ShapeMismatch(f"orthogonal factor needs a square matrix, got {m.shape}")
    u, s, vt = jacobi_svd(m)
    if s[-1] <= EPS_ROW * max(1.0, s[0]):
        raise ShapeMismatch("matrix is rank deficient; orthogonal factor is not unique")
    return u @ vt


def symmetric_eigen_extremes(m: np.ndarray) -> Tuple[float, float]:
    """(lambda_min, lambda_max) of a symmetric matrix by cyclic Jacobi"""
    a = np.array(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"symmetric eigenvalues need a square matrix, got {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > SYMMETRY_TOL * scale:
        raise NotSymmetric("matrix is not symmetric within tolerance")
    a = 0.5 * (a + a.T)
    n = a.shape[0]

    for _ in range(MAX_SWEEPS):
        off = np.abs(a - np.diag(np.diag(a)))
        if n < 2 or np.max(off) <= JACOBI_TOL * max(frobenius_norm(a), np.finfo(float).tiny):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                gamma = a[p, q]
                if gamma == 0.0:
                    continue
                c, s = _rotation(a[p, p], a[q, q], gamma)
                rp = a[p, :].copy()
                a[p, :] = c * rp - s * a[q, :]
                a[q, :] = s * rp + c * a[q, :]
                cp = a[:, p].copy()
                a[:, p] = c * cp - s * a[:, q]
                a[:, q] = s * cp + c * a[:, q]
                a[p, q] = a[q, p] = 0.0
    else:
        raise NoConvergence(f"cyclic Jacobi did not converge in {MAX_SWEEPS} sweeps")

    d = np.diag(a)
    return float(np.min(d)), float(np.max(d))


__all__ = [
    'EPS_ROW',
    'as_matrix',
    'check_finite',
    'frobenius_norm',
    'row_sum_norm',
    'row_softmax',
    'row_normalize',
    'normalize_rows_with_scales',
    'jacobi_svd',
    'singular_extremes',
    'spectral_norm',
    'nearest_orthogonal',
    'symmetric_eigen_extremes',
]
