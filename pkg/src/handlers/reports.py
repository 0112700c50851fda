"""
Bound and counterexample reports: plain text for people, JSON for tools.
"""

import math
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np
import structlog
import ujson

from src.core.bounds import BoundConstants, build_bound_report
from src.core.metrics import effective_rank
from src.core.oracles import (
    CounterexampleSpec,
    CounterexampleSystem,
    closed_form_mus,
    closed_form_trajectory,
    collapse_verdict,
    simulate_counterexample,
    sys1_alpha_sequence,
)

logger = structlog.get_logger(__name__)


def sanitize(value: Any) -> Any:
    """JSON-safe copy: numpy scalars to Python, non-finite floats to "inf"/"-inf"/"nan" """
    if isinstance(value, dict):
        return {str(k): sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [sanitize(v) for v in value]
    if isinstance(value, np.ndarray):
        return sanitize(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return value


def to_json(data: Dict) -> str:
    return ujson.dumps(sanitize(data), sort_keys=True, indent=2)


def json_sibling(path: str) -> Path:
    target = Path(path)
    sibling = target.with_suffix('.json')
    return sibling if sibling != target else target.with_name(target.name + '.report.json')


def write_report(text: str, data: Dict, out_path: Optional[str]) -> None:
    """Write text to out_path and JSON next to it; no-op without a path"""
    if not out_path:
        return
    Path(out_path).write_text(text, encoding='utf-8')
    json_sibling(out_path).write_text(to_json(data) + "\n", encoding='utf-8')
    logger.info("Report written", path=out_path)


def _g(x: Optional[float]) -> str:
    return "n/a" if x is None else f"{x:.6g}"


# =============================================================================
# BOUND REPORT
# =============================================================================

def run_bound_report(constants: BoundConstants, lambda_list: Sequence[float],
                     big_k: int) -> Dict:
    """Lower-bound quantities for every lambda; a pure function of its inputs"""
    reports = [build_bound_report(constants, float(lam), big_k).to_dict() for lam in lambda_list]
    threshold = reports[0]['lambda_threshold'] if reports else None
    return {
        'constants': {
            'c': constants.c,
            's': constants.s,
            'c_m': constants.c_m,
            'n': constants.n,
            'a': constants.a,
        },
        'layers': big_k,
        'lambda_threshold': threshold,
        'envelope_endpoint': constants.a ** big_k,
        'reports': reports,
    }


def format_bound_report(data: Dict) -> str:
    k = data['constants']
    lines = [
        "Skip-connection lower bound report",
        f"c={k['c']:.6g} s={k['s']:.6g} C_M={k['c_m']:.6g} N={k['n']} a={k['a']:.6g} K={data['layers']}",
    ]
    threshold = data['lambda_threshold']
    if threshold == "Infeasible":
        lines.append("lambda_threshold: Infeasible (c^2 - a s^2 <= 0)")
    else:
        lines.append(f"lambda_threshold: {_g(threshold)}")
    lines.append(f"envelope a^K: {data['envelope_endpoint']:.6g}")
    lines.append("")
    lines.append(f"{'lambda':>10}  {'margin':>12}  {'feasible':>8}  {'floor b':>12}")
    for r in data['reports']:
        lines.append(f"{r['lambda']:>10.6g}  {r['feasibility_margin']:>12.6g}  "
                     f"{'yes' if r['feasible'] else 'no':>8}  {_g(r['input_floor_b']):>12}")
    return "\n".join(lines) + "\n"


# =============================================================================
# COUNTEREXAMPLE REPORT
# =============================================================================

def run_counterexample(spec: CounterexampleSpec, big_k: int) -> Dict:
    """Closed-form and simulated traces of Sys-1/Sys-2 with the collapse verdict"""
    trace = simulate_counterexample(spec, big_k)
    realized = closed_form_mus(spec, big_k, realized=True)
    literal = closed_form_mus(spec, big_k, realized=False)
    simulated = [float(x) for x in trace.mus()]
    expected = closed_form_trajectory(spec, big_k, realized=True)
    deviation = max(
        float(np.max(np.abs(trace.snapshot(j) - expected[j]))) for j in range(big_k + 1)
    )
    mu_final = simulated[-1]
    data = {
        'system': spec.system.value,
        'lambda': spec.lam,
        'alpha0': spec.alpha0,
        'beta0': spec.beta0,
        'layers': big_k,
        'closed_form_mu': realized,
        'literal_mu': literal,
        'simulated_mu': simulated,
        'max_deviation': deviation,
        'mu_final': mu_final,
        'verdict': collapse_verdict(mu_final),
        'effective_rank_final': effective_rank(trace.snapshot(big_k)),
    }
    if spec.system is CounterexampleSystem.SYS1:
        data['alpha'] = sys1_alpha_sequence(big_k, spec.lam)[0]
    logger.info("Counterexample evaluated", system=spec.system.value, lam=spec.lam,
                layers=big_k, verdict=data['verdict'], deviation=deviation)
    return data


def format_counterexample(data: Dict) -> str:
    lines = [
        f"Counterexample {data['system']} lambda={data['lambda']:.6g} K={data['layers']}",
        f"verdict: {data['verdict']} (mu(K) = {data['mu_final']:.6g}, threshold 1e-06)",
        f"max deviation simulator vs closed form: {data['max_deviation']:.3e}",
        f"effective rank of Y(K): {data['effective_rank_final']:.6g}",
        "",
        f"{'k':>4}  {'closed form mu':>16}  {'simulated mu':>16}  {'literal mu':>16}",
    ]
    for k, (cf, sim, lit) in enumerate(zip(data['closed_form_mu'], data['simulated_mu'],
                                          data['literal_mu'])):
        lines.append(f"{k:>4}  {cf:>16.9g}  {sim:>16.9g}  {lit:>16.9g}")
    return "\n".join(lines) + "\n"


__all__ = [
    'sanitize',
    'to_json',
    'json_sibling',
    'write_report',
    'run_bound_report',
    'format_bound_report',
    'run_counterexample',
    'format_counterexample',
]
