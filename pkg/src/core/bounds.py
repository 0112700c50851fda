"""
Closed-form rank-collapse bounds and their checks against simulated traces.

Lower bounds (skip connections avoid collapse):
    thm1_margin, lambda_threshold, input_floor_b, recursion_floor, envelope
Upper bounds (collapse is guaranteed):
    thm3_upper, thm3_normalized_upper, lti_upper, selective_upper

The check_* functions take an immutable RankTrace and return a BoundCheck
instead of asserting, so suites can aggregate counts and replay seeds.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core.dynamics import RankTrace
from src.core.errors import BaseOutOfRange, Infeasible, MarginNotPositive, SpecError

TOLERANCE = 1e-9


@dataclass(frozen=True)
class BoundConstants:
    """
    Constants entering the lambda-skip lower bound.

    c and s are lower and upper singular-value bounds of C_V. c > s cannot
    come from a single C_V but the formulas stay well defined, so only
    nonnegativity is enforced.
    """
    c: float
    s: float
    c_m: float
    n: int
    a: float

    def __post_init__(self):
        if self.c < 0 or self.s < 0:
            raise SpecError(f"need c, s >= 0, got c={self.c}, s={self.s}")
        if self.c_m < 0:
            raise SpecError(f"C_M must be nonnegative, got {self.c_m}")
        if not 0 < self.a <= 1:
            raise SpecError(f"collapse rate a must lie in (0, 1], got {self.a}")
        if self.n < 1:
            raise SpecError(f"sequence length must be positive, got {self.n}")


@dataclass
class BoundReport:
    """Lower-bound quantities for one lambda"""
    lam: float
    feasibility_margin: float
    lambda_threshold: Optional[float]
    input_floor_b: Optional[float]
    envelope: List[float]

    @property
    def feasible(self) -> bool:
        return self.feasibility_margin > 0

    def to_dict(self) -> Dict:
        return {
            'lambda': self.lam,
            'feasibility_margin': self.feasibility_margin,
            'feasible': self.feasible,
            'lambda_threshold': self.lambda_threshold if self.lambda_threshold is not None else "Infeasible",
            'input_floor_b': self.input_floor_b,
            'envelope': self.envelope,
        }


@dataclass
class BoundCheck:
    """Outcome of checking one bound against one or more traces"""
    name: str
    checked: int = 0
    skipped: int = 0
    violations: int = 0
    worst_slack: float = math.inf
    details: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def record(self, slack: float, where: str = "") -> None:
        """slack >= -TOLERANCE means the bound held"""
        self.checked += 1
        self.worst_slack = min(self.worst_slack, slack)
        if slack < -TOLERANCE:
            self.violations += 1
            if len(self.details) < 10:
                self.details.append(f"{where} slack={slack:.3e}")

    def skip(self, reason: str) -> None:
        self.skipped += 1
        if len(self.details) < 10:
            self.details.append(f"skipped: {reason}")

    def merge(self, other: 'BoundCheck') -> 'BoundCheck':
        self.checked += other.checked
        self.skipped += other.skipped
        self.violations += other.violations
        self.worst_slack = min(self.worst_slack, other.worst_slack)
        self.details.extend(other.details[: max(0, 10 - len(self.details))])
        return self


# =============================================================================
# LOWER BOUNDS
# =============================================================================

def thm1_margin(lam: float, k: BoundConstants) -> float:
    """lambda^2 c^2 - a s^2 (C_M + |lambda|)^2; positive iff the condition holds"""
    return lam * lam * k.c * k.c - k.a * k.s * k.s * (k.c_m + abs(lam)) ** 2


def lambda_threshold(k: BoundConstants) -> float:
    """Smallest |lambda| beyond which thm1_margin is positive"""
    denom = k.c * k.c - k.a * k.s * k.s
    if denom <= 0:
        raise Infeasible(f"c^2 - a s^2 = {denom:.6g} <= 0: no lambda avoids collapse at rate a={k.a}")
    root = math.sqrt(k.a * k.c * k.c * k.c_m * k.c_m * k.s * k.s)
    return (k.a * k.c_m * k.s * k.s + root) / denom


def input_floor_b(lam: float, k: BoundConstants, big_k: int) -> float:
    """
    Minimum mu(Y^0)^2 for the K-layer guarantee.

    The numerator keeps the sign of lambda; a value <= 0 means every input
    qualifies.
    """
    margin = thm1_margin(lam, k)
    if margin <= 0:
        raise MarginNotPositive(f"margin {margin:.6g} at lambda={lam} is not positive")
    return (2.0 * lam * k.n * k.s * k.s * k.c_m / margin) / (k.a ** big_k)


def recursion_floor(mu_sq_prev: float, lam: float, k: BoundConstants) -> float:
    """
    Per-layer lower bound on mu(Y^(k+1))^2 under LayerNorm.

    (lambda^2 c^2 mu^2 - 2 |lambda| N S^2 C_M) / (S^2 (C_M + |lambda|)^2); may be
    negative, in which case it is vacuous.
    """
    lam_abs = abs(lam)
    denom = k.s * k.s * (k.c_m + lam_abs) ** 2
    if denom == 0:
        return 0.0
    return (lam * lam * k.c * k.c * mu_sq_prev - 2.0 * lam_abs * k.n * k.s * k.s * k.c_m) / denom


def envelope(a: float, big_k: int, mu0_sq: float = 1.0) -> List[float]:
    """a^k mu0^2 for k = 0..K"""
    return [mu0_sq * a ** j for j in range(big_k + 1)]


def build_bound_report(constants: BoundConstants, lam: float, big_k: int,
                       mu0_sq: Optional[float] = None) -> BoundReport:
    margin = thm1_margin(lam, constants)
    try:
        threshold = lambda_threshold(constants)
    except Infeasible:
        threshold = None
    floor = input_floor_b(lam, constants, big_k) if margin > 0 else None
    return BoundReport(
        lam=lam,
        feasibility_margin=margin,
        lambda_threshold=threshold,
        input_floor_b=floor,
        envelope=envelope(constants.a, big_k, 1.0 if mu0_sq is None else mu0_sq),
    )


# =============================================================================
# UPPER BOUNDS
# =============================================================================

def thm3_upper(n: int, c: float, lambda_min: float, alpha: float, big_k: int) -> float:
    """sqrt(N) (1 - c^2 lambda_min^2 alpha^(2N))^K as stated"""
    q = c * c * lambda_min * lambda_min * alpha ** (2 * n)
    if not 0 < q < 1:
        raise BaseOutOfRange(f"c^2 lambda_min^2 alpha^(2N) = {q:.6g} is outside (0, 1)")
    return math.sqrt(n) * (1.0 - q) ** big_k


def thm3_normalized_upper(n: int, c: float, lambda_min: float, lambda_max: float,
                          alpha: float, big_k: int) -> float:
    """
    sqrt(N) (1 - c^2 (lambda_min / (N lambda_max))^2 alpha^(2N))^(K/2).

    Holds for nonnegative unit rows with phi(Y^0) >= c, a positive diagonal
    kernel W_C W_B^T and 0 < alpha <= 1 at lambda = 0; no row-sum or
    lambda_max <= 1/N assumption is needed.
    """
    if lambda_max <= 0:
        raise BaseOutOfRange("lambda_max must be positive")
    rho = (lambda_min / (n * lambda_max)) ** 2
    q = c * c * rho * alpha ** (2 * n)
    if not 0 < q < 1:
        raise BaseOutOfRange(f"normalized base term {q:.6g} is outside (0, 1)")
    return math.sqrt(n) * (1.0 - q) ** (big_k / 2.0)


def lti_upper(layer_norms: Sequence[float], y0_frob: float) -> float:
    """Product of per-layer spectral norms times ||Y^0||_F"""
    return float(np.prod(np.asarray(layer_norms, dtype=float))) * y0_frob if len(layer_norms) else y0_frob


def _log_space(log_value: float) -> float:
    if log_value > 709.0:
        return math.inf
    return math.exp(log_value)


def selective_upper(n: int, wbc_frob: float, y0_frob: float, k: int) -> Tuple[float, float]:
    """
    (norm_bound, mu_bound) for a selective stack without skip or LayerNorm.

    norm_bound = s^((3^k - 1)/2) y0^(3^k), mu_bound = s^((3^(k-1) + 1)/2) y0^(3^k)
    with s = sqrt(N) ||W_BC||_F. mu_bound is NaN for k = 0. Overflow gives inf.
    """
    s = math.sqrt(n) * wbc_frob
    if k == 0:
        return y0_frob, math.nan
    if s == 0 or y0_frob == 0:
        return 0.0, 0.0
    log_s = math.log(s)
    log_y = math.log(y0_frob)
    cube = 3.0 ** k
    norm_bound = _log_space((cube - 1) / 2.0 * log_s + cube * log_y)
    mu_bound = _log_space((3.0 ** (k - 1) + 1) / 2.0 * log_s + cube * log_y)
    return norm_bound, mu_bound


# =============================================================================
# TRACE CHECKS
# =============================================================================

def effective_c_m(trace: RankTrace, floor: float = 0.0) -> float:
    """sup over layers of max(||M||_F, ||M||_inf), at least `floor`"""
    values = [max(d.mixing_frob, d.mixing_inf) for d in trace.diagnostics]
    return max([floor] + values)


def check_recursion_floor(trace: RankTrace, lam: float, k: BoundConstants) -> BoundCheck:
    check = BoundCheck("recursion_floor")
    mus = trace.mus()
    for j in range(len(mus) - 1):
        floor = recursion_floor(mus[j] ** 2, lam, k)
        check.record(mus[j + 1] ** 2 - floor, where=f"layer {j + 1}")
    return check


def check_thm1_guarantee(trace: RankTrace, a: float) -> BoundCheck:
    """mu(Y^k)^2 >= a^k mu(Y^0)^2 for every recorded k"""
    check = BoundCheck("thm1_guarantee")
    mus = trace.mus()
    lower = envelope(a, len(mus) - 1, mus[0] ** 2)
    for j in range(1, len(mus)):
        check.record(mus[j] ** 2 - lower[j], where=f"layer {j}")
    return check


@dataclass
class Thm3Preconditions:
    """Hypotheses of the stated upper bound, evaluated on one run"""
    phi0: float
    c: float
    lambda_min: float
    lambda_max: float
    alpha: float
    n: int
    min_row_sum: float

    def failures(self) -> List[str]:
        reasons = []
        if not 0 < self.c <= self.phi0:
            reasons.append(f"phi0={self.phi0:.4g} below c={self.c:.4g}")
        if self.lambda_min <= 0:
            reasons.append(f"lambda_min={self.lambda_min:.4g} not positive")
        if not 0 < self.alpha <= 1:
            reasons.append(f"alpha={self.alpha:.4g} outside (0, 1]")
        base = self.c ** 2 * self.lambda_min ** 2 * self.alpha ** (2 * self.n)
        if not 0 < base < 1:
            reasons.append(f"base term {base:.4g} outside (0, 1)")
        if self.min_row_sum < 1:
            reasons.append(f"row sum {self.min_row_sum:.4g} below 1")
        if self.lambda_max > 1.0 / self.n:
            reasons.append(f"lambda_max={self.lambda_max:.4g} above 1/N")
        return reasons

    @property
    def satisfied(self) -> bool:
        return not self.failures()


def evaluate_thm3_preconditions(trace: RankTrace, c: float, lambda_min: float,
                                lambda_max: float, alpha: float, n: int) -> Thm3Preconditions:
    row_sums = [d.min_row_sum for d in trace.diagnostics]
    return Thm3Preconditions(
        phi0=trace.samples[0].phi,
        c=c,
        lambda_min=lambda_min,
        lambda_max=lambda_max,
        alpha=alpha,
        n=n,
        min_row_sum=min(row_sums) if row_sums else math.inf,
    )


def check_thm3(trace: RankTrace, pre: Thm3Preconditions) -> BoundCheck:
    """Stated bound; skipped with the failing hypotheses when they do not hold"""
    check = BoundCheck("thm3_stated")
    reasons = pre.failures()
    if reasons:
        check.skip("; ".join(reasons))
        return check
    mus = trace.mus()
    for j in range(len(mus)):
        bound = thm3_upper(pre.n, pre.c, pre.lambda_min, pre.alpha, j)
        check.record(bound - mus[j], where=f"layer {j}")
    return check


def check_thm3_normalized(trace: RankTrace, c: float, lambda_min: float, lambda_max: float,
                          alpha: float, n: int) -> BoundCheck:
    check = BoundCheck("thm3_normalized")
    mus = trace.mus()
    for j in range(len(mus)):
        bound = thm3_normalized_upper(n, c, lambda_min, lambda_max, alpha, j)
        check.record(bound - mus[j], where=f"layer {j}")
    return check


def check_lti_dominance(trace: RankTrace, layer_norms: Sequence[float]) -> BoundCheck:
    check = BoundCheck("lti_upper")
    mus = trace.mus()
    y0 = trace.samples[0].y_frob
    for j in range(len(mus)):
        bound = lti_upper(layer_norms[:j], y0)
        check.record(bound * (1 + 1e-12) - mus[j], where=f"layer {j}")
    return check


def check_selective_dominance(trace: RankTrace, n: int, wbc_frob: float,
                              include_mu: bool = True) -> BoundCheck:
    """Norm bound always; mu bound when include_mu (sound for sqrt(N) ||W_BC||_F <= 1)"""
    check = BoundCheck("selective_upper")
    y0 = trace.samples[0].y_frob
    for j, sample in enumerate(trace.samples):
        norm_bound, mu_bound = selective_upper(n, wbc_frob, y0, j)
        check.record(norm_bound * (1 + 1e-12) - sample.y_frob, where=f"norm layer {j}")
        if include_mu and j >= 1:
            check.record(mu_bound * (1 + 1e-12) - sample.mu, where=f"mu layer {j}")
    return check


def check_doubly_exponential(trace: RankTrace, floor: float = 1e-100) -> BoundCheck:
    """log ||Y^(k+1)|| <= 3 log ||Y^(k)|| while the norms stay above `floor`"""
    check = BoundCheck("doubly_exponential")
    frobs = trace.y_frobs()
    for j in range(len(frobs) - 1):
        if frobs[j] <= floor or frobs[j + 1] <= 0:
            break
        check.record(3.0 * math.log(frobs[j]) - math.log(frobs[j + 1]), where=f"layer {j + 1}")
    return check


def check_layernorm_scale(trace: RankTrace, n: int, lambda_max: float) -> BoundCheck:
    """Every LayerNorm scale D_ii >= 1 / (N lambda_max)"""
    check = BoundCheck("layernorm_scale")
    floor = 1.0 / (n * lambda_max)
    for j, diag in enumerate(trace.diagnostics, start=1):
        if diag.min_ln_scale is None:
            check.skip(f"layer {j} has no LayerNorm")
            continue
        check.record(diag.min_ln_scale - floor + 1e-12, where=f"layer {j}")
    return check


def check_selective_entry_floor(m: np.ndarray, lambda_min: float, phi_y: float, alpha: float) -> BoundCheck:
    """Lower-triangular entries M_ij >= lambda_min phi(Y) alpha^N"""
    check = BoundCheck("selective_entry_floor")
    n = m.shape[0]
    floor = lambda_min * phi_y * alpha ** n
    rows, cols = np.tril_indices(n)
    for i, j in zip(rows, cols):
        check.record(m[i, j] - floor + 1e-12, where=f"entry ({i}, {j})")
    return check


__all__ = [
    'TOLERANCE',
    'BoundConstants',
    'BoundReport',
    'BoundCheck',
    'Thm3Preconditions',
    'thm1_margin',
    'lambda_threshold',
    'input_floor_b',
    'recursion_floor',
    'envelope',
    'build_bound_report',
    'thm3_upper',
    'thm3_normalized_upper',
    'lti_upper',
    'selective_upper',
    'effective_c_m',
    'check_recursion_floor',
    'check_thm1_guarantee',
    'evaluate_thm3_preconditions',
    'check_thm3',
    'check_thm3_normalized',
    'check_lti_dominance',
    'check_selective_dominance',
    'check_doubly_exponential',
    'check_layernorm_scale',
    'check_selective_entry_floor',
]
