"""
Configuration management for Rank Collapse Lab
"""

import os
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, List, Optional

import ujson
from dotenv import load_dotenv

from src.core.errors import ConfigurationError

# Load environment variables
load_dotenv()

DEFAULT_LAMBDA_GRID = [-5.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 5.0]
BLOCK_KINDS = ('attention', 'lti', 'structured', 'selective')
INIT_KINDS = ('gaussian', 'orthogonal')
INPUT_KINDS = ('positive', 'gaussian')
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')


def parse_lambda_list(text: str) -> List[float]:
    """Comma-separated reals, e.g. "-5,0,0.5" """
    try:
        return [float(part) for part in text.split(',') if part.strip()]
    except ValueError as e:
        raise ConfigurationError(f"Invalid lambda list '{text}': {e}") from e


def parse_flag(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ('on', 'true', '1', 'yes'):
        return True
    if text in ('off', 'false', '0', 'no'):
        return False
    raise ConfigurationError(f"Expected on/off, got '{value}'")


@dataclass
class RunConfig:
    """Experiment settings shared by every subcommand"""

    # Model
    seed: int = 0
    block: str = "selective"
    n: int = 8
    d: int = 8
    k_layers: int = 64
    lambda_list: List[float] = field(default_factory=lambda: list(DEFAULT_LAMBDA_GRID))
    layernorm: bool = True
    gating: bool = False

    # Random generation
    init: str = "gaussian"
    init_scale: float = 1.0
    input_kind: str = "positive"
    decay: float = 0.5
    normalize_input: bool = True

    # Output and execution
    output_path: Optional[str] = None
    workers: int = 1

    # Logging settings
    log_level: str = "INFO"
    log_format: str = "text"  # text or json

    @classmethod
    def from_env(cls) -> 'RunConfig':
        """Create config from RANKLAB_* environment variables"""
        defaults = cls()
        lambdas = os.getenv('RANKLAB_LAMBDA')
        try:
            return cls(
                seed=int(os.getenv('RANKLAB_SEED', defaults.seed)),
                block=os.getenv('RANKLAB_BLOCK', defaults.block),
                n=int(os.getenv('RANKLAB_SEQ_LEN', defaults.n)),
                d=int(os.getenv('RANKLAB_DIM', defaults.d)),
                k_layers=int(os.getenv('RANKLAB_LAYERS', defaults.k_layers)),
                lambda_list=parse_lambda_list(lambdas) if lambdas else defaults.lambda_list,
                layernorm=parse_flag(os.getenv('RANKLAB_LAYERNORM', 'on')),
                gating=parse_flag(os.getenv('RANKLAB_GATING', 'off')),
                init=os.getenv('RANKLAB_INIT', defaults.init),
                init_scale=float(os.getenv('RANKLAB_INIT_SCALE', defaults.init_scale)),
                input_kind=os.getenv('RANKLAB_INPUT', defaults.input_kind),
                decay=float(os.getenv('RANKLAB_DECAY', defaults.decay)),
                normalize_input=parse_flag(os.getenv('RANKLAB_NORMALIZE_INPUT', 'on')),
                output_path=os.getenv('RANKLAB_OUT'),
                workers=int(os.getenv('RANKLAB_WORKERS', defaults.workers)),
                log_level=os.getenv('LOG_LEVEL', defaults.log_level),
                log_format=os.getenv('LOG_FORMAT', defaults.log_format),
            )
        except ValueError as e:
            raise ConfigurationError(f"Invalid environment setting: {e}") from e

    @classmethod
    def from_json_file(cls, path: str, base: Optional['RunConfig'] = None) -> 'RunConfig':
        """Apply a flat JSON object on top of `base` (defaults when omitted)"""
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = ujson.load(f)
        except OSError as e:
            raise ConfigurationError(f"Cannot read config file {path}: {e}") from e
        except ValueError as e:
            raise ConfigurationError(f"Config file {path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError(f"Config file {path} must hold a flat JSON object")
        return (base or cls()).merged(data)

    def merged(self, overrides: Dict[str, Any]) -> 'RunConfig':
        """Copy with the non-None entries of `overrides` applied"""
        known = {f.name for f in fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ConfigurationError(f"Unknown config keys: {', '.join(unknown)}")
        values = {k: v for k, v in overrides.items() if v is not None}
        if isinstance(values.get('lambda_list'), str):
            values['lambda_list'] = parse_lambda_list(values['lambda_list'])
        for flag in ('layernorm', 'gating', 'normalize_input'):
            if flag in values:
                values[flag] = parse_flag(values[flag])
        try:
            if 'lambda_list' in values:
                values['lambda_list'] = [float(x) for x in values['lambda_list']]
            for key in ('seed', 'n', 'd', 'k_layers', 'workers'):
                if key in values:
                    values[key] = int(values[key])
            for key in ('init_scale', 'decay'):
                if key in values:
                    values[key] = float(values[key])
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"Invalid config value: {e}") from e
        return replace(self, **values)

    def validate(self) -> None:
        """Validate configuration"""
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigurationError("Seed must be an unsigned 64-bit integer")

        if self.block not in BLOCK_KINDS:
            raise ConfigurationError(f"Block must be one of {', '.join(BLOCK_KINDS)}")

        if self.n < 1 or self.d < 1:
            raise ConfigurationError("Sequence length and dimension must be positive")

        if self.k_layers < 0:
            raise ConfigurationError("Layer count cannot be negative")

        if not self.lambda_list:
            raise ConfigurationError("Lambda list must not be empty")

        if self.init not in INIT_KINDS:
            raise ConfigurationError(f"Init must be one of {', '.join(INIT_KINDS)}")

        if self.init_scale <= 0:
            raise ConfigurationError("Init scale must be positive")

        if self.input_kind not in INPUT_KINDS:
            raise ConfigurationError(f"Input must be one of {', '.join(INPUT_KINDS)}")

        if self.workers < 1:
            raise ConfigurationError("Worker count must be positive")

        if self.log_level.upper() not in LOG_LEVELS:
            raise ConfigurationError(f"Log level must be one of {', '.join(LOG_LEVELS)}")

        if self.log_format not in ('text', 'json'):
            raise ConfigurationError("Log format must be text or json")

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# Global config instance (defaults + environment; validated by the CLI)
config = RunConfig.from_env()
