"""
Layer composition and K-layer forward passes.

One layer follows the unified recursion

    O  = M(Y_prev) Y_prev C_V          mixing (M rebuilt for input-dependent kinds)
    O <- O * silu(Y_prev W_gate)       optional gating
    Y~ = lambda Y_prev + O             lambda-skip
    Y  = D Y~                          optional normalization-only LayerNorm
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import structlog

from src.core.errors import NonFinite, ShapeMismatch, SpecError, ZeroRow
from src.core.linalg import (
    as_matrix,
    check_finite,
    frobenius_norm,
    normalize_rows_with_scales,
    row_normalize,
    row_sum_norm,
)
from src.core.metrics import MetricSample
from src.core.mixing import MixingKind, MixingSpec, apply_gating, build_mixing

logger = structlog.get_logger(__name__)


@dataclass(eq=False)
class LayerSpec:
    """One layer of the stack"""
    mixing: MixingSpec
    lam: float = 0.0
    use_layernorm: bool = True
    use_gating: bool = False
    gate_weight: Optional[np.ndarray] = None
    value_weight: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.use_gating and self.gate_weight is None:
            raise SpecError("gating enabled without a gate weight")
        if self.mixing.kind is MixingKind.ATTENTION:
            if self.value_weight is None:
                self.value_weight = self.mixing.w_v
        elif self.value_weight is not None:
            raise SpecError("value weight C_V is only defined for attention layers")

    def check_shapes(self, n: int, d: int) -> None:
        spec = self.mixing
        if spec.kind is MixingKind.ATTENTION and spec.w_q.shape[0] != d:
            raise ShapeMismatch(f"W_Q expects {spec.w_q.shape[0]} features, model has {d}")
        if spec.kind is MixingKind.STRUCTURED_LTI and spec.w_c.shape[0] != n:
            raise ShapeMismatch(f"W_C has {spec.w_c.shape[0]} rows, sequence length is {n}")
        if spec.kind is MixingKind.SELECTIVE and spec.w_c.shape[0] != d:
            raise ShapeMismatch(f"W_C expects {spec.w_c.shape[0]} features, model has {d}")
        if self.value_weight is not None and self.value_weight.shape != (d, d):
            raise ShapeMismatch(f"C_V has shape {self.value_weight.shape}, need {(d, d)}")
        if self.use_gating and self.gate_weight.shape != (d, d):
            raise ShapeMismatch(f"gate weight has shape {self.gate_weight.shape}, need {(d, d)}")


@dataclass(eq=False)
class ModelSpec:
    """A stack of K layers acting on N x d inputs"""
    layers: List[LayerSpec]
    seq_len: int
    embed_dim: int

    def __post_init__(self):
        for layer in self.layers:
            layer.check_shapes(self.seq_len, self.embed_dim)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def uses_layernorm(self) -> bool:
        return any(layer.use_layernorm for layer in self.layers)


@dataclass(frozen=True)
class LayerDiagnostics:
    """Mixing statistics of one layer, needed by the bound checks"""
    mixing_frob: float
    mixing_inf: float
    min_row_sum: float
    min_ln_scale: Optional[float] = None


@dataclass
class RankTrace:
    """Per-layer metrics; entry 0 describes the (possibly normalized) input"""
    samples: List[MetricSample] = field(default_factory=list)
    diagnostics: List[LayerDiagnostics] = field(default_factory=list)
    snapshots: Optional[List[np.ndarray]] = None

    def __len__(self) -> int:
        return len(self.samples)

    def mus(self) -> np.ndarray:
        return np.array([s.mu for s in self.samples])

    def normalized_mus(self) -> np.ndarray:
        return np.array([s.normalized_mu for s in self.samples])

    def y_frobs(self) -> np.ndarray:
        return np.array([s.y_frob for s in self.samples])

    def final(self) -> MetricSample:
        return self.samples[-1]

    def snapshot(self, k: int) -> np.ndarray:
        if self.snapshots is None:
            raise ValueError("trace was recorded without snapshots")
        return self.snapshots[k]


def _layer_step(y_prev: np.ndarray, layer: LayerSpec) -> Tuple[np.ndarray, LayerDiagnostics]:
    with np.errstate(over='ignore', invalid='ignore'):
        m = build_mixing(y_prev, layer.mixing)
        check_finite(m, "mixing matrix")
        o = m @ y_prev
        if layer.value_weight is not None:
            o = o @ layer.value_weight
        if layer.use_gating:
            o = apply_gating(o, y_prev, layer.gate_weight)
        y_tilde = layer.lam * y_prev + o
        check_finite(y_tilde, "layer output")

    min_scale = None
    if layer.use_layernorm:
        y, scales = normalize_rows_with_scales(y_tilde)
        min_scale = float(np.min(scales))
    else:
        y = y_tilde

    diag = LayerDiagnostics(
        mixing_frob=frobenius_norm(m),
        mixing_inf=row_sum_norm(m),
        min_row_sum=float(np.min(np.sum(m, axis=1))),
        min_ln_scale=min_scale,
    )
    return y, diag


def layer_forward(y_prev: np.ndarray, layer: LayerSpec) -> np.ndarray:
    layer.check_shapes(*y_prev.shape)
    return _layer_step(y_prev, layer)[0]


def model_forward(y0: np.ndarray, model: ModelSpec, record_snapshots: bool = False,
                  normalize_input: bool = True) -> RankTrace:
    """
    Run the stack and record metrics of every Y^(k).

    When any layer uses LayerNorm the input is row-normalized first (disable
    with normalize_input=False). Errors carry the failing layer index and the
    trace recorded so far.
    """
    y = as_matrix(y0, "input")
    if y.shape != (model.seq_len, model.embed_dim):
        raise ShapeMismatch(f"input shape {y.shape} does not match model "
                            f"{(model.seq_len, model.embed_dim)}")
    if normalize_input and model.uses_layernorm:
        y = row_normalize(y)

    trace = RankTrace(snapshots=[] if record_snapshots else None)
    trace.samples.append(MetricSample.from_matrix(y))
    if record_snapshots:
        trace.snapshots.append(y.copy())

    for k, layer in enumerate(model.layers, start=1):
        try:
            y, diag = _layer_step(y, layer)
        except NonFinite as e:
            logger.warning("Overflow in forward pass", layer=k)
            raise NonFinite(f"layer {k}: {e}", layer=k, partial_trace=trace) from e
        except ZeroRow as e:
            logger.warning("Degenerate row in forward pass", layer=k, row=e.row)
            raise ZeroRow(f"layer {k}: {e}", row=e.row, layer=k, partial_trace=trace) from e
        sample = MetricSample.from_matrix(y)
        if not sample.is_finite():
            logger.warning("Non-finite metrics in forward pass", layer=k)
            raise NonFinite(f"layer {k}: non-finite metrics", layer=k, partial_trace=trace)
        trace.samples.append(sample)
        trace.diagnostics.append(diag)
        if record_snapshots:
            trace.snapshots.append(y.copy())

    return trace


def uniform_model(mixings: List[MixingSpec], n: int, d: int, lam: float,
                  use_layernorm: bool, gate_weights: Optional[List[np.ndarray]] = None) -> ModelSpec:
    """Stack with the same lambda and LayerNorm flag in every layer"""
    layers = []
    for i, spec in enumerate(mixings):
        gate = None if gate_weights is None else gate_weights[i]
        layers.append(LayerSpec(mixing=spec, lam=lam, use_layernorm=use_layernorm,
                                use_gating=gate is not None, gate_weight=gate))
    return ModelSpec(layers=layers, seq_len=n, embed_dim=d)


__all__ = [
    'LayerSpec',
    'ModelSpec',
    'LayerDiagnostics',
    'RankTrace',
    'layer_forward',
    'model_forward',
    'uniform_model',
]
