"""
Seeded random models and inputs.

Streams are numpy Generators over PCG64 seeded by SeedSequence(seed,
spawn_key=(stream,)). Sweeps draw weights and inputs from the fixed streams
WEIGHT_STREAM and INPUT_STREAM so every lambda cell sees the same model;
suites give trial t the stream (seed, t).
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from src.core.config import RunConfig
from src.core.dynamics import ModelSpec, uniform_model
from src.core.errors import ConfigurationError
from src.core.linalg import nearest_orthogonal, row_normalize
from src.core.mixing import MixingKind, MixingSpec

WEIGHT_STREAM = 0
INPUT_STREAM = 1
# Suite trial streams start here so they never alias the sweep streams
TRIAL_STREAM_BASE = 1000


def make_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return make_rng(seed, TRIAL_STREAM_BASE + trial)


def random_weight(rng: np.random.Generator, rows: int, cols: int, init: str = "gaussian",
                  scale: float = 1.0) -> np.ndarray:
    """Gaussian entries with std scale/sqrt(rows), or the orthogonal factor of such a draw"""
    draw = rng.normal(0.0, scale / np.sqrt(rows), size=(rows, cols))
    if init == "gaussian":
        return draw
    if init == "orthogonal":
        if rows != cols:
            raise ConfigurationError(f"orthogonal init needs a square weight, got {rows}x{cols}")
        return scale * nearest_orthogonal(draw)
    raise ConfigurationError(f"Unknown init '{init}'")


def random_input(rng: np.random.Generator, n: int, d: int, kind: str = "positive") -> np.ndarray:
    """Unit rows; `positive` rows lie in the nonnegative orthant so phi(Y) > 0"""
    draw = rng.normal(size=(n, d))
    if kind == "positive":
        draw = np.abs(draw)
    elif kind != "gaussian":
        raise ConfigurationError(f"Unknown input kind '{kind}'")
    return row_normalize(draw)


def random_mixing(rng: np.random.Generator, kind: MixingKind, n: int, d: int,
                  init: str = "gaussian", scale: float = 1.0, decay: float = 0.5) -> MixingSpec:
    if kind is MixingKind.ATTENTION:
        return MixingSpec.attention(
            random_weight(rng, d, d, "gaussian", scale),
            random_weight(rng, d, d, "gaussian", scale),
            random_weight(rng, d, d, init, scale),
        )
    if kind is MixingKind.LTI_SCALAR:
        b, c = rng.normal(0.0, scale, size=2)
        return MixingSpec.lti_scalar(decay, b, c)
    if kind is MixingKind.STRUCTURED_LTI:
        return MixingSpec.structured_lti(
            np.full(n - 1, decay),
            random_weight(rng, n, n, init, scale),
            random_weight(rng, n, n, init, scale),
        )
    # tied weights keep the kernel W_C W_B^T symmetric PSD
    w = random_weight(rng, d, d, init, scale)
    return MixingSpec.selective(decay, w, w)


@dataclass(eq=False)
class SweepModel:
    """Weights of one sweep: K mixings and K gate weights, independent of lambda"""
    mixings: List[MixingSpec]
    gates: List[np.ndarray]
    y0: np.ndarray

    def build(self, n: int, d: int, lam: float, layernorm: bool, gating: bool) -> ModelSpec:
        return uniform_model(self.mixings, n, d, lam, layernorm,
                             gate_weights=self.gates if gating else None)


def sweep_model(config: RunConfig) -> SweepModel:
    """Draw the sweep's weights and input from the fixed streams of config.seed"""
    kind = MixingKind(config.block)
    weights = make_rng(config.seed, WEIGHT_STREAM)
    mixings, gates = [], []
    for _ in range(config.k_layers):
        mixings.append(random_mixing(weights, kind, config.n, config.d,
                                     config.init, config.init_scale, config.decay))
        # gates are always drawn so gating on/off cells share the mixing weights
        gates.append(random_weight(weights, config.d, config.d, "gaussian", 1.0))
    y0 = random_input(make_rng(config.seed, INPUT_STREAM), config.n, config.d, config.input_kind)
    return SweepModel(mixings=mixings, gates=gates, y0=y0)


def random_dims(rng: np.random.Generator, n_range: Tuple[int, int] = (2, 6),
                d_range: Tuple[int, int] = (2, 5)) -> Tuple[int, int]:
    return int(rng.integers(n_range[0], n_range[1] + 1)), int(rng.integers(d_range[0], d_range[1] + 1))


def stack(mixings: List[MixingSpec], n: int, d: int, lam: float, layernorm: bool) -> ModelSpec:
    """Stack without gating; attention layers use their W_V as C_V"""
    return uniform_model(mixings, n, d, lam, layernorm)


__all__ = [
    'WEIGHT_STREAM',
    'INPUT_STREAM',
    'TRIAL_STREAM_BASE',
    'make_rng',
    'trial_rng',
    'random_weight',
    'random_input',
    'random_mixing',
    'SweepModel',
    'sweep_model',
    'random_dims',
    'stack',
]
