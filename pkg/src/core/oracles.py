"""
Closed-form evaluators for the two-token counterexample systems.

Sys-1: structured LTI block with M = [[1, 0], [2, 1]], lambda-skip and
LayerNorm, Y^0 = I. Its second row is parameterized by alpha_k >= 1.

Sys-2: selective block with alpha = 1 and W_B = W_C = I, lambda-skip and
LayerNorm. Its second row has an explicit power form.

Both closed forms are written for 1 + lambda > 0. When 1 + lambda < 0,
LayerNorm flips the sign of rows each layer; the `realized` variants carry
that sign pattern and are what the simulator reproduces exactly.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

import numpy as np
import structlog

from src.core.dynamics import LayerSpec, ModelSpec, model_forward
from src.core.errors import DegenerateNorm, DomainError, LambdaSingular, SpecError
from src.core.metrics import mu
from src.core.mixing import MixingSpec

logger = structlog.get_logger(__name__)

SYS1_ALPHA = 2.0
COLLAPSE_THRESHOLD = 1e-6


class CounterexampleSystem(Enum):
    SYS1 = "sys1"
    SYS2 = "sys2"


@dataclass(frozen=True)
class CounterexampleSpec:
    system: CounterexampleSystem
    lam: float
    alpha0: float = 1.0
    beta0: float = 1.0

    def __post_init__(self):
        if self.system is CounterexampleSystem.SYS1 and self.lam == -1.0:
            raise LambdaSingular("Sys-1 is undefined at lambda = -1")
        if self.system is CounterexampleSystem.SYS2 and self.alpha0 <= 0:
            raise SpecError(f"Sys-2 needs alpha0 > 0, got {self.alpha0}")


def _sign(x: float) -> float:
    return 1.0 if x >= 0 else -1.0


def sys1_alpha_step(alpha_k: float, lam: float, branch: float = 1.0) -> float:
    """
    alpha_(k+1) = alpha_k (1 + 4/(1+lambda)^2) + branch * (4/(1+lambda)) sqrt(alpha_k - 1) sqrt(alpha_k)

    branch = +1 is the recurrence as stated; the realized trajectory uses the
    sign of the current second-row first coordinate.
    """
    if lam == -1.0:
        raise LambdaSingular("recurrence is singular at lambda = -1")
    if alpha_k < 1.0 - 1e-12:
        raise DomainError(f"alpha_k = {alpha_k} is below 1")
    excess = max(alpha_k - 1.0, 0.0)
    r = 4.0 / (1.0 + lam)
    return alpha_k * (1.0 + r * r / 4.0) + branch * r * math.sqrt(excess) * math.sqrt(alpha_k)


def sys1_alpha_sequence(k: int, lam: float, realized: bool = False) -> Tuple[List[float], List[float]]:
    """alpha_0..alpha_k and the sign tau_j of each second-row frame coordinate"""
    if lam == -1.0:
        raise LambdaSingular("Sys-1 is undefined at lambda = -1")
    sigma = _sign(1.0 + lam)
    alphas = [1.0]
    taus = [1.0]
    for _ in range(k):
        alpha, tau = alphas[-1], taus[-1]
        branch = tau if realized else 1.0
        nxt = sys1_alpha_step(alpha, lam, branch)
        if realized:
            t = tau * math.sqrt(max(1.0 - 1.0 / alpha, 0.0))
            tau = sigma * _sign(2.0 + (1.0 + lam) * t)
        alphas.append(nxt)
        taus.append(tau)
    return alphas, taus


def _sys1_matrix(alpha: float, tau: float, sign: float) -> np.ndarray:
    frac = 1.0 - 1.0 / alpha if math.isfinite(alpha) else 1.0
    return sign * np.array([
        [1.0, 0.0],
        [tau * math.sqrt(max(frac, 0.0)), 1.0 / math.sqrt(alpha)],
    ])


def sys1_state(k: int, lam: float, realized: bool = False) -> np.ndarray:
    """Y^(k) = [[1, 0], [sqrt((alpha_k - 1)/alpha_k), 1/sqrt(alpha_k)]]"""
    alphas, taus = sys1_alpha_sequence(k, lam, realized)
    sign = _sign(1.0 + lam) ** k if realized else 1.0
    return _sys1_matrix(alphas[-1], taus[-1] if realized else 1.0, sign)


def sys1_trajectory(k: int, lam: float, realized: bool = False) -> List[np.ndarray]:
    alphas, taus = sys1_alpha_sequence(k, lam, realized)
    sigma = _sign(1.0 + lam)
    return [
        _sys1_matrix(alphas[j], taus[j] if realized else 1.0, sigma ** j if realized else 1.0)
        for j in range(k + 1)
    ]


def sys2_state(k: int, lam: float, alpha0: float = 1.0, beta0: float = 1.0,
               realized: bool = False) -> np.ndarray:
    """Second row ((2+lambda)^k alpha0, (1+lambda)^k beta0) normalized; first row (1, 0)"""
    if alpha0 <= 0:
        raise SpecError(f"Sys-2 needs alpha0 > 0, got {alpha0}")
    p_vanishes = lam == -2.0 and k > 0
    q_vanishes = beta0 == 0.0 or (lam == -1.0 and k > 0)
    if p_vanishes and q_vanishes:
        raise DegenerateNorm(f"Sys-2 second row vanishes at k={k}, lambda={lam}")
    try:
        p = (2.0 + lam) ** k * alpha0
        q = (1.0 + lam) ** k * beta0
    except OverflowError:
        return _sys2_matrix_logspace(k, lam, alpha0, beta0, realized, p_vanishes, q_vanishes)
    scale = max(abs(p), abs(q))
    if scale == 0.0 or not math.isfinite(scale):
        # both powers under- or overflowed
        return _sys2_matrix_logspace(k, lam, alpha0, beta0, realized, p_vanishes, q_vanishes)
    p, q = p / scale, q / scale
    norm = math.hypot(p, q)
    first = _sign(1.0 + lam) ** k if realized else 1.0
    return np.array([[first, 0.0], [p / norm, q / norm]])


def _sys2_matrix_logspace(k: int, lam: float, alpha0: float, beta0: float, realized: bool,
                          p_vanishes: bool, q_vanishes: bool) -> np.ndarray:
    log_p = -math.inf if p_vanishes else k * math.log(abs(2.0 + lam)) + math.log(alpha0)
    log_q = -math.inf if q_vanishes else k * math.log(abs(1.0 + lam)) + math.log(abs(beta0))
    top = max(log_p, log_q)
    p = _sign(2.0 + lam) ** k * math.exp(log_p - top)
    q = _sign(1.0 + lam) ** k * _sign(beta0) * math.exp(log_q - top)
    norm = math.hypot(p, q)
    first = _sign(1.0 + lam) ** k if realized else 1.0
    return np.array([[first, 0.0], [p / norm, q / norm]])


def sys1_model(lam: float, big_k: int) -> ModelSpec:
    """Structured LTI stack realizing Sys-1: 1SS((2,)) * (ones ones^T) = [[1, 0], [2, 1]]"""
    spec = MixingSpec.structured_lti([SYS1_ALPHA], np.ones((2, 1)), np.ones((2, 1)))
    layers = [LayerSpec(mixing=spec, lam=lam, use_layernorm=True) for _ in range(big_k)]
    return ModelSpec(layers=layers, seq_len=2, embed_dim=2)


def sys2_model(lam: float, big_k: int) -> ModelSpec:
    spec = MixingSpec.selective(1.0, np.eye(2), np.eye(2))
    layers = [LayerSpec(mixing=spec, lam=lam, use_layernorm=True) for _ in range(big_k)]
    return ModelSpec(layers=layers, seq_len=2, embed_dim=2)


def counterexample_input(spec: CounterexampleSpec) -> np.ndarray:
    if spec.system is CounterexampleSystem.SYS1:
        return np.eye(2)
    norm = math.hypot(spec.alpha0, spec.beta0)
    return np.array([[1.0, 0.0], [spec.alpha0 / norm, spec.beta0 / norm]])


def closed_form_trajectory(spec: CounterexampleSpec, big_k: int,
                           realized: bool = True) -> List[np.ndarray]:
    if spec.system is CounterexampleSystem.SYS1:
        return sys1_trajectory(big_k, spec.lam, realized)
    return [sys2_state(j, spec.lam, spec.alpha0, spec.beta0, realized) for j in range(big_k + 1)]


def simulate_counterexample(spec: CounterexampleSpec, big_k: int):
    """Run the general simulator on the matching model; returns the RankTrace"""
    model = sys1_model(spec.lam, big_k) if spec.system is CounterexampleSystem.SYS1 \
        else sys2_model(spec.lam, big_k)
    return model_forward(counterexample_input(spec), model, record_snapshots=True)


def oracle_vs_simulator(spec: CounterexampleSpec, big_k: int) -> float:
    """Max entrywise |simulated - closed form| over k <= K"""
    expected = closed_form_trajectory(spec, big_k, realized=True)
    trace = simulate_counterexample(spec, big_k)
    deviation = max(
        float(np.max(np.abs(trace.snapshot(j) - expected[j]))) for j in range(big_k + 1)
    )
    logger.debug("Oracle comparison", system=spec.system.value, lam=spec.lam,
                 layers=big_k, deviation=deviation)
    return deviation


def collapse_verdict(mu_final: float, threshold: float = COLLAPSE_THRESHOLD) -> str:
    return "collapse" if mu_final < threshold else "no-collapse"


def closed_form_mus(spec: CounterexampleSpec, big_k: int, realized: bool = True) -> List[float]:
    return [mu(y) for y in closed_form_trajectory(spec, big_k, realized)]


__all__ = [
    'CounterexampleSystem',
    'CounterexampleSpec',
    'SYS1_ALPHA',
    'sys1_alpha_step',
    'sys1_alpha_sequence',
    'sys1_state',
    'sys1_trajectory',
    'sys2_state',
    'sys1_model',
    'sys2_model',
    'counterexample_input',
    'closed_form_trajectory',
    'simulate_counterexample',
    'oracle_vs_simulator',
    'collapse_verdict',
    'closed_form_mus',
]
