#!/usr/bin/env python3
"""
Command-line harness for Rank Collapse Lab.

Usage:
    rank-lab sweep --block selective --layers 64 --lambda=-5,0,1 --out sweep.csv
    rank-lab ablate --grid gating --lambda 0 --out ablation.csv
    rank-lab bounds --rate 0.25 --c-min 1 --s-max 1 --c-m 2 --lambda 3
    rank-lab counterexample --system sys2 --lambda=-3 --layers 50
    rank-lab verify --suite oracles --trials 10
    rank-lab score sweep.csv --rate 0.9

Exit status: 0 on success, 1 when a property or suite fails, 2 on
configuration or specification errors.
"""

import argparse
import sys
from typing import Any, Dict, List, Optional

import structlog

from src.core.bounds import BoundConstants
from src.core.config import RunConfig, config as env_config, parse_lambda_list
from src.core.errors import ConfigurationError, RankLabError, SpecError
from src.core.logging_config import configure_logging
from src.core.oracles import CounterexampleSpec, CounterexampleSystem
from src.handlers.experiments import (
    run_ablation,
    run_lambda_sweep,
    score_sweep_csv,
    write_sweep_csv,
)
from src.handlers.reports import (
    format_bound_report,
    format_counterexample,
    run_bound_report,
    run_counterexample,
    write_report,
)
from src.handlers.verify import SUITES, run_verify

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def _model_flags() -> argparse.ArgumentParser:
    """Flags shared by every subcommand that builds a RunConfig"""
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument('--config', help='Flat JSON config file; flags override it')
    parent.add_argument('--seed', type=int, help='Unsigned 64-bit seed')
    parent.add_argument('--layers', type=int, dest='k_layers', help='Number of layers K')
    parent.add_argument('--seq-len', type=int, dest='n', help='Sequence length N')
    parent.add_argument('--dim', type=int, dest='d', help='Embedding dimension d')
    parent.add_argument('--lambda', dest='lambda_list', help='Comma-separated lambda values')
    parent.add_argument('--block', choices=['attention', 'lti', 'structured', 'selective'])
    parent.add_argument('--layernorm', choices=['on', 'off'])
    parent.add_argument('--gating', choices=['on', 'off'])
    parent.add_argument('--init', choices=['gaussian', 'orthogonal'])
    parent.add_argument('--init-scale', type=float, dest='init_scale')
    parent.add_argument('--decay', type=float, help='SSM decay alpha')
    parent.add_argument('--input', choices=['positive', 'gaussian'], dest='input_kind')
    parent.add_argument('--workers', type=int, help='Parallel sweep cells')
    parent.add_argument('--out', dest='output_path', help='Output path (stdout when omitted)')
    parent.add_argument('--log-level', dest='log_level')
    parent.add_argument('--log-format', choices=['text', 'json'], dest='log_format')
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='rank-lab',
        description='Rank collapse in attention and state-space stacks',
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest='command', required=True)
    flags = _model_flags()

    sub.add_parser('sweep', parents=[flags], help='Per-layer metrics for each lambda')

    ablate = sub.add_parser('ablate', parents=[flags], help='Gating or skip ablation grid')
    ablate.add_argument('--grid', choices=['gating', 'skip'], default='gating')

    bounds = sub.add_parser('bounds', parents=[flags], help='Skip-connection lower bound report')
    bounds.add_argument('--rate', type=float, required=True, help='Collapse rate a')
    bounds.add_argument('--c-min', type=float, default=1.0, dest='c_min', help='sigma_min of C_V')
    bounds.add_argument('--s-max', type=float, default=1.0, dest='s_max', help='sigma_max of C_V')
    bounds.add_argument('--c-m', type=float, required=True, dest='c_m', help='Mixing norm bound C_M')

    counter = sub.add_parser('counterexample', parents=[flags], help='Closed form vs simulator')
    counter.add_argument('--system', choices=['sys1', 'sys2'], required=True)
    counter.add_argument('--alpha0', type=float, default=1.0)
    counter.add_argument('--beta0', type=float, default=1.0)

    verify = sub.add_parser('verify', parents=[flags], help='Run property suites')
    verify.add_argument('--suite', choices=sorted(SUITES) + ['all'], default='all')
    verify.add_argument('--trials', type=int, help='Trials per suite (suite default when omitted)')
    verify.add_argument('--inject-infeasible', action='store_true', dest='inject_infeasible',
                        help='Negative control: thm1 with lambda below the threshold')

    score = sub.add_parser('score', parents=[flags], help='Score a sweep CSV against a^k')
    score.add_argument('csv', help='CSV in the sweep schema')
    score.add_argument('--rate', type=float, default=0.9, help='Collapse rate a for the envelope')

    return parser


CONFIG_KEYS = ('seed', 'k_layers', 'n', 'd', 'lambda_list', 'block', 'layernorm', 'gating',
               'init', 'init_scale', 'decay', 'input_kind', 'workers', 'output_path',
               'log_level', 'log_format')


def resolve_config(args: argparse.Namespace, base: Optional[RunConfig] = None) -> RunConfig:
    """defaults < environment < JSON file < flags"""
    cfg = base if base is not None else env_config
    if args.config:
        cfg = RunConfig.from_json_file(args.config, base=cfg)
    overrides: Dict[str, Any] = {key: getattr(args, key, None) for key in CONFIG_KEYS}
    cfg = cfg.merged(overrides)
    cfg.validate()
    return cfg


def _emit(text: str, out_path: Optional[str]) -> None:
    if out_path is None:
        sys.stdout.write(text)


def cmd_sweep(args: argparse.Namespace, cfg: RunConfig) -> int:
    rows = run_lambda_sweep(cfg) if args.command == 'sweep' else run_ablation(cfg, args.grid)
    write_sweep_csv(rows, cfg.output_path or sys.stdout)
    return EXIT_OK


def cmd_bounds(args: argparse.Namespace, cfg: RunConfig) -> int:
    constants = BoundConstants(c=args.c_min, s=args.s_max, c_m=args.c_m, n=cfg.n, a=args.rate)
    data = run_bound_report(constants, cfg.lambda_list, cfg.k_layers)
    text = format_bound_report(data)
    _emit(text, cfg.output_path)
    write_report(text, data, cfg.output_path)
    return EXIT_OK


def cmd_counterexample(args: argparse.Namespace, cfg: RunConfig) -> int:
    if args.lambda_list is None:
        raise ConfigurationError("counterexample needs --lambda")
    lambdas = parse_lambda_list(args.lambda_list)
    if len(lambdas) != 1:
        raise ConfigurationError("counterexample takes a single --lambda value")
    spec = CounterexampleSpec(CounterexampleSystem(args.system), lambdas[0],
                              alpha0=args.alpha0, beta0=args.beta0)
    data = run_counterexample(spec, cfg.k_layers)
    text = format_counterexample(data)
    _emit(text, cfg.output_path)
    write_report(text, data, cfg.output_path)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, cfg: RunConfig) -> int:
    results = run_verify(args.suite, cfg.seed, args.trials, args.inject_infeasible)
    text = "\n".join(r.summary() for r in results) + "\n"
    data = {'passed': all(r.passed for r in results), 'suites': [r.to_dict() for r in results]}
    _emit(text, cfg.output_path)
    write_report(text, data, cfg.output_path)
    return EXIT_OK if data['passed'] else EXIT_FAILED


def cmd_score(args: argparse.Namespace, cfg: RunConfig) -> int:
    scores = score_sweep_csv(args.csv, args.rate)
    lines = [f"{'run_id':<48} {'min_rate':>12} {'final_nmu':>12} {'envelope':>9}"]
    for s in scores:
        lines.append(f"{s.run_id:<48} {s.min_rate:>12.6g} {s.final_normalized_mu:>12.6g} "
                     f"{'held' if s.envelope_held else 'broken':>9}"
                     + ("  (flagged)" if s.flagged else ""))
    text = "\n".join(lines) + "\n"
    data = {'rate': args.rate, 'runs': [s.to_dict() for s in scores]}
    _emit(text, cfg.output_path)
    write_report(text, data, cfg.output_path)
    return EXIT_OK


COMMANDS = {
    'sweep': cmd_sweep,
    'ablate': cmd_sweep,
    'bounds': cmd_bounds,
    'counterexample': cmd_counterexample,
    'verify': cmd_verify,
    'score': cmd_score,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(env_config.log_level, env_config.log_format)
    try:
        cfg = resolve_config(args)
        configure_logging(cfg.log_level, cfg.log_format)
        return COMMANDS[args.command](args, cfg)
    except (ConfigurationError, SpecError) as e:
        logger.error("Invalid configuration", command=args.command, error=str(e),
                     error_type=type(e).__name__)
        return EXIT_CONFIG
    except RankLabError as e:
        logger.error("Run failed", command=args.command, error=str(e), error_type=type(e).__name__)
        return EXIT_FAILED
    except OSError as e:
        logger.error("I/O error", command=args.command, error=str(e))
        return EXIT_FAILED


__all__ = ['build_parser', 'resolve_config', 'main']


if __name__ == '__main__':
    sys.exit(main())
