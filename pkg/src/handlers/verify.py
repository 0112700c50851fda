"""
Property suites driven by `rank-lab verify`.

Each suite draws `trials` random configurations, trial t from the stream
(seed, t), runs the simulator and feeds the trace to the bound checkers.
Configurations are restricted to the hypotheses under which each bound is
sound; failures keep the trial index so a run can be replayed with the same
seed.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
import structlog

from src.core.bounds import (
    BoundCheck,
    BoundConstants,
    check_doubly_exponential,
    check_selective_entry_floor,
    check_layernorm_scale,
    check_lti_dominance,
    check_recursion_floor,
    check_selective_dominance,
    check_thm1_guarantee,
    check_thm3,
    check_thm3_normalized,
    effective_c_m,
    evaluate_thm3_preconditions,
    input_floor_b,
    lambda_threshold,
    thm1_margin,
    thm3_upper,
)
from src.core.dynamics import ModelSpec, RankTrace, model_forward
from src.core.errors import ConfigurationError, NonFinite
from src.core.linalg import (
    frobenius_norm,
    row_sum_norm,
    singular_extremes,
    spectral_norm,
    symmetric_eigen_extremes,
)
from src.core.metrics import mu
from src.core.mixing import (
    MixingKind,
    MixingSpec,
    attention_mixing,
    build_mixing,
    c_m_supremum,
    selective_mixing,
)
from src.core.oracles import CounterexampleSpec, CounterexampleSystem, oracle_vs_simulator
from src.handlers.models import random_dims, random_input, random_mixing, random_weight, stack, trial_rng

logger = structlog.get_logger(__name__)

KINDS = list(MixingKind)
ORACLE_TOLERANCE = 1e-10
# ||M||_2 = 0.5 for 10 layers on a unit-norm input gives 0.5^10 = 9.766e-4
LTI_HALF_NORM_LAYERS = 10
LTI_HALF_NORM_LIMIT = 9.8e-4
DECAY_LAYERS = 64


@dataclass
class SuiteResult:
    """Per-check counts of one suite run plus the trials that failed"""
    suite: str
    seed: int
    trials: int
    checks: Dict[str, BoundCheck] = field(default_factory=dict)
    failing_trials: List[int] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks.values())

    def absorb(self, trial: int, check: BoundCheck, name: Optional[str] = None) -> None:
        key = name or check.name
        if key not in self.checks:
            self.checks[key] = BoundCheck(key)
        self.checks[key].merge(check)
        if not check.passed and trial not in self.failing_trials:
            self.failing_trials.append(trial)
            logger.warning("Property violated", suite=self.suite, check=key, trial=trial,
                           replay=self.replay(trial), worst_slack=check.worst_slack)

    def replay(self, trial: int) -> str:
        # trial -1 marks the fixed cases, which every run repeats
        return f"--suite {self.suite} --seed {self.seed} --trials {max(trial + 1, 1)}"

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lines = [f"[{status}] suite={self.suite} seed={self.seed} trials={self.trials}"]
        for name, check in self.checks.items():
            slack = "n/a" if math.isinf(check.worst_slack) else f"{check.worst_slack:.3e}"
            lines.append(f"  {name}: checked={check.checked} skipped={check.skipped} "
                         f"violations={check.violations} worst_slack={slack}")
            for detail in check.details[:3]:
                lines.append(f"    {detail}")
        for note in self.notes:
            lines.append(f"  note: {note}")
        for trial in self.failing_trials:
            lines.append(f"  failing trial {trial}: replay with {self.replay(trial)}")
        return "\n".join(lines)

    def to_dict(self) -> Dict:
        return {
            'suite': self.suite,
            'seed': self.seed,
            'trials': self.trials,
            'passed': self.passed,
            'checks': {
                name: {
                    'checked': c.checked,
                    'skipped': c.skipped,
                    'violations': c.violations,
                    'worst_slack': c.worst_slack,
                }
                for name, c in self.checks.items()
            },
            'failing_trials': self.failing_trials,
            'notes': self.notes,
        }


def _forward(y0: np.ndarray, model: ModelSpec, **kwargs) -> RankTrace:
    """Trace up to the last finite layer; overflow ends the trace early"""
    try:
        return model_forward(y0, model, **kwargs)
    except NonFinite as e:
        return e.partial_trace


def _single(name: str, slack: float, where: str = "") -> BoundCheck:
    check = BoundCheck(name)
    check.record(slack, where)
    return check


# =============================================================================
# LOWER BOUNDS
# =============================================================================

def suite_thm1(seed: int, trials: int, inject_infeasible: bool = False) -> SuiteResult:
    """
    End-to-end lower bound: pick lambda past the threshold with margin > 0 and
    mu(Y^0)^2 >= b, then require mu(Y^k)^2 >= a^k mu(Y^0)^2.

    With inject_infeasible, lambda is set to half the threshold; the margin
    precondition must then fail.
    """
    result = SuiteResult("thm1", seed, trials)
    for t in range(trials):
        rng = trial_rng(seed, t)
        kind = KINDS[int(rng.integers(len(KINDS)))]
        n, d = random_dims(rng)
        big_k = int(rng.integers(1, 9))
        a = float(rng.uniform(0.3, 0.9))
        # orthogonal W_V gives c = S = 1
        mixings = [random_mixing(rng, kind, n, d, "orthogonal", 1.0, float(rng.uniform(0.2, 1.0)))
                   for _ in range(big_k)]
        constants = BoundConstants(c=1.0, s=1.0, c_m=max(c_m_supremum(m, n) for m in mixings),
                                   n=n, a=a)
        threshold = lambda_threshold(constants)
        sign = 1.0 if rng.random() < 0.5 else -1.0

        if inject_infeasible:
            lam = sign * threshold / 2.0
            result.absorb(t, _single("thm1_precondition", thm1_margin(lam, constants),
                                     f"lambda={lam:.6g}"))
            continue

        y0 = random_input(rng, n, d, "gaussian")
        mu0_sq = mu(y0) ** 2
        lam_abs = 2.0 * threshold
        found = False
        for _ in range(64):
            # |lambda| keeps the induction valid for both signs
            if input_floor_b(lam_abs, constants, big_k) <= mu0_sq:
                found = True
                break
            lam_abs *= 2.0
        lam = sign * lam_abs
        result.absorb(t, _single("thm1_precondition", thm1_margin(lam, constants),
                                 f"lambda={lam:.6g}"))

        trace = model_forward(y0, stack(mixings, n, d, lam, layernorm=True))
        if found:
            result.absorb(t, check_thm1_guarantee(trace, a))
        else:
            skipped = BoundCheck("thm1_guarantee")
            skipped.skip(f"input floor above mu0^2={mu0_sq:.4g}; recursion floor checked instead")
            result.absorb(t, skipped)
        result.absorb(t, check_recursion_floor(trace, lam, constants))
    return result


def suite_recursion(seed: int, trials: int) -> SuiteResult:
    """Per-layer floor with C_M = max over layers of max(||M||_F, ||M||_inf)"""
    result = SuiteResult("recursion", seed, trials)
    for t in range(trials):
        rng = trial_rng(seed, t)
        kind = KINDS[int(rng.integers(len(KINDS)))]
        n, d = random_dims(rng)
        big_k = int(rng.integers(1, 9))
        lam = float(rng.uniform(-10.0, 10.0))
        mixings = [random_mixing(rng, kind, n, d, "orthogonal", 1.0, float(rng.uniform(-1.0, 1.0)))
                   for _ in range(big_k)]
        y0 = random_input(rng, n, d, "gaussian")
        trace = model_forward(y0, stack(mixings, n, d, lam, layernorm=True))
        constants = BoundConstants(c=1.0, s=1.0, c_m=effective_c_m(trace), n=n, a=1.0)
        result.absorb(t, check_recursion_floor(trace, lam, constants))
    return result


# =============================================================================
# UPPER BOUNDS
# =============================================================================

def _diag_selective(w: np.ndarray, alpha: float) -> MixingSpec:
    """Selective block with W_B = I and positive diagonal W_C"""
    return MixingSpec.selective(alpha, np.eye(w.size), np.diag(w))


def stated_thm3_counterexample() -> Dict[str, float]:
    """N = 2, alpha = 1, W = 1.99 I, phi0 = c = 0.5, K = 1: exceeds the stated bound"""
    y0 = np.array([[1.0, 0.0], [0.5, math.sqrt(3.0) / 2.0]])
    spec = _diag_selective(np.full(2, 1.99), 1.0)
    trace = model_forward(y0, stack([spec], 2, 2, 0.0, layernorm=True))
    bound = thm3_upper(2, 0.5, 1.99, 1.0, 1)
    return {'mu': float(trace.mus()[1]), 'stated_bound': bound}


def suite_thm3(seed: int, trials: int) -> SuiteResult:
    """
    Stated bound: evaluated, skipped with its failing hypotheses.
    Normalized bound: asserted on nonnegative inputs, diagonal kernels, lambda = 0.
    """
    result = SuiteResult("thm3", seed, trials)
    for t in range(trials):
        rng = trial_rng(seed, t)
        n, d = random_dims(rng, (2, 5), (2, 4))
        big_k = int(rng.integers(1, 21))
        alpha = float(rng.uniform(0.5, 1.0))
        w = rng.uniform(0.5, 1.5, size=d)
        spec = _diag_selective(w, alpha)
        y0 = random_input(rng, n, d, "positive")
        trace = model_forward(y0, stack([spec] * big_k, n, d, 0.0, layernorm=True))
        lambda_min, lambda_max = float(np.min(w)), float(np.max(w))
        c = 0.999 * trace.samples[0].phi

        pre = evaluate_thm3_preconditions(trace, c, lambda_min, lambda_max, alpha, n)
        result.absorb(t, check_thm3(trace, pre))
        result.absorb(t, check_thm3_normalized(trace, c, lambda_min, lambda_max, alpha, n))

    counter = stated_thm3_counterexample()
    result.absorb(-1, _single("thm3_stated_counterexample", counter['mu'] - counter['stated_bound'],
                              "N=2 W=1.99I"))
    result.notes.append(f"stated bound {counter['stated_bound']:.4g} is exceeded by "
                        f"mu={counter['mu']:.4g} once lambda_max <= 1/N is dropped")
    return result


def _half_norm(spec: MixingSpec, n: int) -> MixingSpec:
    """Rescale an LTI block so that ||M||_2 = 0.5"""
    m = build_mixing(np.zeros((n, 1)), spec)
    factor = 0.5 / spectral_norm(m)
    if spec.kind is MixingKind.LTI_SCALAR:
        return MixingSpec.lti_scalar(spec.a, spec.b, spec.c * factor)
    return MixingSpec.structured_lti(spec.alpha, spec.w_c * factor, spec.w_b)


def suite_lti(seed: int, trials: int) -> SuiteResult:
    """mu(Y^k) <= prod ||M_j||_2 ||Y^0||_F for LTI stacks without skip or LayerNorm"""
    result = SuiteResult("lti", seed, trials)
    for t in range(trials):
        rng = trial_rng(seed, t)
        kind = MixingKind.LTI_SCALAR if rng.random() < 0.5 else MixingKind.STRUCTURED_LTI
        n, d = random_dims(rng)
        big_k = int(rng.integers(1, 21))
        mixings = [random_mixing(rng, kind, n, d, "gaussian", 1.0, float(rng.uniform(-1.0, 1.0)))
                   for _ in range(big_k)]
        y0 = random_input(rng, n, d, "gaussian")
        norms = [spectral_norm(build_mixing(y0, m)) for m in mixings]
        trace = _forward(y0, stack(mixings, n, d, 0.0, layernorm=False))
        result.absorb(t, check_lti_dominance(trace, norms))

        halved = [_half_norm(m, n) for m in mixings[:1]] * LTI_HALF_NORM_LAYERS
        unit = y0 / frobenius_norm(y0)
        trace = model_forward(unit, stack(halved, n, d, 0.0, layernorm=False))
        result.absorb(t, check_lti_dominance(trace, [0.5] * LTI_HALF_NORM_LAYERS))
        result.absorb(t, _single("lti_half_norm", LTI_HALF_NORM_LIMIT - trace.final().mu,
                                 f"layer {LTI_HALF_NORM_LAYERS}"))
    return result


def _scaled_selective(rng: np.random.Generator, n: int, d: int, s: float, alpha: float) -> MixingSpec:
    """Tied selective block with sqrt(N) ||W W^T||_F = s"""
    w = random_weight(rng, d, d)
    w = w * math.sqrt(s / (math.sqrt(n) * frobenius_norm(w @ w.T)))
    return MixingSpec.selective(alpha, w, w)


def _scaled_input(rng: np.random.Generator, n: int, d: int, frob: float) -> np.ndarray:
    return random_input(rng, n, d, "gaussian") * (frob / math.sqrt(n))


def suite_selective(seed: int, trials: int) -> SuiteResult:
    """
    Norm growth ||Y^k|| <= s^((3^k - 1)/2) ||Y^0||^(3^k) for any s, the mu bound
    for s <= 1, and the doubly-exponential decay signature for s, ||Y^0|| < 1.
    """
    result = SuiteResult("selective", seed, trials)
    for t in range(trials):
        rng = trial_rng(seed, t)
        n, d = random_dims(rng)
        alpha = float(rng.uniform(0.05, 1.0))

        s = float(rng.uniform(0.3, 1.0))
        spec = _scaled_selective(rng, n, d, s, alpha)
        y0 = _scaled_input(rng, n, d, float(rng.uniform(0.5, 1.5)))
        big_k = int(rng.integers(1, 7))
        trace = _forward(y0, stack([spec] * big_k, n, d, 0.0, layernorm=False))
        result.absorb(t, check_selective_dominance(trace, n, s / math.sqrt(n), include_mu=True))

        s = float(rng.uniform(1.0, 3.0))
        spec = _scaled_selective(rng, n, d, s, alpha)
        y0 = _scaled_input(rng, n, d, float(rng.uniform(0.3, 1.2)))
        big_k = int(rng.integers(1, 6))
        trace = _forward(y0, stack([spec] * big_k, n, d, 0.0, layernorm=False))
        result.absorb(t, check_selective_dominance(trace, n, s / math.sqrt(n), include_mu=False),
                      name="selective_norm_growth")

        s = float(rng.uniform(0.3, 0.8))
        spec = _scaled_selective(rng, n, d, s, alpha)
        y0 = _scaled_input(rng, n, d, float(rng.uniform(0.3, 0.9)))
        trace = _forward(y0, stack([spec] * 8, n, d, 0.0, layernorm=False))
        result.absorb(t, check_doubly_exponential(trace))
    return result


# =============================================================================
# STRUCTURAL PROPERTIES
# =============================================================================

def suite_lemmas(seed: int, trials: int) -> SuiteResult:
    result = SuiteResult("lemmas", seed, trials)
    for t in range(trials):
        rng = trial_rng(seed, t)
        n, d = random_dims(rng)

        # ||A||_F sigma_min(B) <= ||AB||_F <= ||A||_F sigma_max(B), B with full row rank
        m = int(rng.integers(1, 5))
        a_mat = rng.normal(size=(n, m))
        b_mat = rng.normal(size=(m, m + int(rng.integers(0, 3))))
        s_min, s_max = singular_extremes(b_mat)
        prod, a_frob = frobenius_norm(a_mat @ b_mat), frobenius_norm(a_mat)
        slack = 1e-9 * max(1.0, prod)
        result.absorb(t, _single("frobenius_lower", prod - s_min * a_frob + slack))
        result.absorb(t, _single("frobenius_upper", s_max * a_frob - prod + slack))

        y = random_input(rng, n, d, "gaussian")
        att = attention_mixing(y, random_mixing(rng, MixingKind.ATTENTION, n, d))
        check = BoundCheck("attention_row_stochastic")
        check.record(1e-12 - float(np.max(np.abs(att.sum(axis=1) - 1.0))), "row sums")
        check.record(float(np.min(att)), "entries")
        result.absorb(t, check)

        check = BoundCheck("ssm_lower_triangular")
        for kind in (MixingKind.LTI_SCALAR, MixingKind.STRUCTURED_LTI, MixingKind.SELECTIVE):
            spec = random_mixing(rng, kind, n, d, decay=float(rng.uniform(-1.0, 1.0)))
            check.record(-float(np.max(np.abs(np.triu(build_mixing(y, spec), 1)))), kind.value)
        result.absorb(t, check)

        check = BoundCheck("c_m_supremum")
        for kind in KINDS:
            spec = random_mixing(rng, kind, n, d, decay=float(rng.uniform(-1.0, 1.0)))
            mixing = build_mixing(y, spec)
            bound = c_m_supremum(spec, n)
            check.record(bound * (1 + 1e-12) - max(frobenius_norm(mixing), row_sum_norm(mixing)),
                         kind.value)
        result.absorb(t, check)

        # entries of the diagonal-kernel family on nonnegative rows
        alpha = float(rng.uniform(0.3, 1.0))
        w = rng.uniform(0.5, 1.5, size=d)
        y_pos = random_input(rng, n, d, "positive")
        mixing = selective_mixing(y_pos, _diag_selective(w, alpha))
        phi_y = float(np.min(y_pos @ y_pos.T))
        result.absorb(t, check_selective_entry_floor(mixing, float(np.min(w)), phi_y, alpha))

        # LayerNorm scales for a tied PSD kernel at lambda = 0
        weight = random_weight(rng, d, d)
        spec = MixingSpec.selective(alpha, weight, weight)
        lambda_max = symmetric_eigen_extremes(weight @ weight.T)[1]
        trace = model_forward(y, stack([spec] * int(rng.integers(1, 9)), n, d, 0.0, layernorm=True))
        result.absorb(t, check_layernorm_scale(trace, n, lambda_max))
    return result


# =============================================================================
# ORACLES AND EMPIRICAL DECAY
# =============================================================================

ORACLE_CASES = [
    (CounterexampleSystem.SYS1, 1.0),
    (CounterexampleSystem.SYS1, 0.0),
    (CounterexampleSystem.SYS1, -3.0),
    (CounterexampleSystem.SYS2, 0.0),
    (CounterexampleSystem.SYS2, -3.0),
]
ORACLE_LAYERS = 30


def suite_oracles(seed: int, trials: int) -> SuiteResult:
    """Simulator against the closed forms: fixed cases plus random lambdas per trial"""
    result = SuiteResult("oracles", seed, trials)
    for system, lam in ORACLE_CASES:
        deviation = oracle_vs_simulator(CounterexampleSpec(system, lam), ORACLE_LAYERS)
        result.absorb(-1, _single("oracle_fixed", ORACLE_TOLERANCE - deviation,
                                  f"{system.value} lambda={lam}"))
    for t in range(trials):
        rng = trial_rng(seed, t)
        lam = float(rng.uniform(-0.5, 3.0)) if rng.random() < 0.5 else float(rng.uniform(-6.0, -1.5))
        deviation = oracle_vs_simulator(CounterexampleSpec(CounterexampleSystem.SYS1, lam), ORACLE_LAYERS)
        result.absorb(t, _single("oracle_sys1", ORACLE_TOLERANCE - deviation, f"lambda={lam:.6g}"))

        spec = CounterexampleSpec(CounterexampleSystem.SYS2, float(rng.uniform(-4.0, 2.0)),
                                  alpha0=float(rng.uniform(0.1, 2.0)),
                                  beta0=float(rng.uniform(-2.0, 2.0)))
        deviation = oracle_vs_simulator(spec, ORACLE_LAYERS)
        result.absorb(t, _single("oracle_sys2", ORACLE_TOLERANCE - deviation,
                                 f"lambda={spec.lam:.6g}"))
    return result


def fitted_log_rate(mus: np.ndarray) -> float:
    """Least-squares slope of log mu_k against k over the positive entries"""
    k = np.arange(len(mus))
    keep = mus > 0
    if np.count_nonzero(keep) < 2:
        return -math.inf
    return float(np.polyfit(k[keep], np.log(mus[keep]), 1)[0])


def suite_decay(seed: int, trials: int) -> SuiteResult:
    """Attention with orthogonal W_V: mu_K <= mu_0 / 2 at lambda = 0 with LayerNorm and with neither"""
    result = SuiteResult("decay", seed, trials)
    for t in range(trials):
        rng = trial_rng(seed, t)
        n, d = random_dims(rng, (3, 8), (3, 8))
        mixings = [random_mixing(rng, MixingKind.ATTENTION, n, d, "orthogonal")
                   for _ in range(DECAY_LAYERS)]
        y0 = random_input(rng, n, d, "positive")
        for label, layernorm in (("layernorm", True), ("plain", False)):
            trace = model_forward(y0, stack(mixings, n, d, 0.0, layernorm=layernorm))
            mus = trace.mus()
            result.absorb(t, _single(f"decay_{label}", 0.5 * mus[0] - mus[-1], f"K={DECAY_LAYERS}"))
            result.absorb(t, _single(f"decay_{label}_rate", -fitted_log_rate(mus)))
    return result


# =============================================================================
# DISPATCH
# =============================================================================

SUITES: Dict[str, Callable[..., SuiteResult]] = {
    'thm1': suite_thm1,
    'recursion': suite_recursion,
    'thm3': suite_thm3,
    'lti': suite_lti,
    'selective': suite_selective,
    'lemmas': suite_lemmas,
    'oracles': suite_oracles,
    'decay': suite_decay,
}

DEFAULT_TRIALS = {
    'thm1': 20,
    'recursion': 100,
    'thm3': 50,
    'lti': 100,
    'selective': 50,
    'lemmas': 20,
    'oracles': 10,
    'decay': 10,
}


def run_verify(suite: str, seed: int, trials: Optional[int] = None,
               inject_infeasible: bool = False) -> List[SuiteResult]:
    """Run one suite, or every suite for `all`; trials defaults per suite"""
    if trials is not None and trials < 1:
        raise ConfigurationError("trials must be at least 1")
    names = list(SUITES) if suite == 'all' else [suite]
    results = []
    for name in names:
        if name not in SUITES:
            raise ConfigurationError(f"Unknown suite '{name}'")
        count = trials if trials is not None else DEFAULT_TRIALS[name]
        logger.info("Running suite", suite=name, seed=seed, trials=count)
        if name == 'thm1':
            result = suite_thm1(seed, count, inject_infeasible=inject_infeasible)
        else:
            result = SUITES[name](seed, count)
        logger.info("Suite finished", suite=name, passed=result.passed)
        results.append(result)
    return results


__all__ = [
    'SuiteResult',
    'SUITES',
    'DEFAULT_TRIALS',
    'suite_thm1',
    'suite_recursion',
    'suite_thm3',
    'suite_lti',
    'suite_selective',
    'suite_lemmas',
    'suite_oracles',
    'suite_decay',
    'stated_thm3_counterexample',
    'fitted_log_rate',
    'run_verify',
]
