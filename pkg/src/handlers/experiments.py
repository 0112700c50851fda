"""
Lambda sweeps, ablation grids and the CSV artifact they produce.

Every cell is independent: it rebuilds the seeded weights, runs the stack and
returns its rows. Cells may run in a multiprocessing Pool; rows are always
emitted in (cell index, layer) order.
"""

import io
import math
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Dict, List, Optional, TextIO, Union

import pandas as pd
import structlog

from src.core.config import RunConfig
from src.core.dynamics import RankTrace, model_forward
from src.core.errors import ConfigurationError, NonFinite, SpecError, ZeroRow
from src.handlers.models import sweep_model

logger = structlog.get_logger(__name__)

CSV_HEADER = ['run_id', 'seed', 'block', 'layer', 'lambda', 'mu', 'normalized_mu', 'phi', 'y_frob']
METRIC_COLUMNS = ['mu', 'normalized_mu', 'phi', 'y_frob']
OVERFLOW_TOKEN = "overflow"
DEGENERATE_TOKEN = "degenerate"
TOKENS = (OVERFLOW_TOKEN, DEGENERATE_TOKEN)

Metric = Union[float, str]


@dataclass
class SweepRow:
    """One (cell, layer) record; metrics are floats or a failure token"""
    run_id: str
    seed: int
    block: str
    layer: int
    lam: float
    mu: Metric
    normalized_mu: Metric
    phi: Metric
    y_frob: Metric

    @property
    def flagged(self) -> bool:
        return isinstance(self.mu, str)

    def to_record(self) -> Dict[str, str]:
        return {
            'run_id': self.run_id,
            'seed': str(self.seed),
            'block': self.block,
            'layer': str(self.layer),
            'lambda': _fmt(self.lam),
            'mu': _fmt(self.mu),
            'normalized_mu': _fmt(self.normalized_mu),
            'phi': _fmt(self.phi),
            'y_frob': _fmt(self.y_frob),
        }

    @classmethod
    def from_record(cls, record: Dict[str, str]) -> 'SweepRow':
        return cls(
            run_id=record['run_id'],
            seed=int(record['seed']),
            block=record['block'],
            layer=int(record['layer']),
            lam=float(record['lambda']),
            mu=_parse(record['mu']),
            normalized_mu=_parse(record['normalized_mu']),
            phi=_parse(record['phi']),
            y_frob=_parse(record['y_frob']),
        )


def _fmt(value: Metric) -> str:
    # repr of a Python float is the shortest string that round-trips
    return value if isinstance(value, str) else repr(float(value))


def _parse(text: str) -> Metric:
    return text if text in TOKENS else float(text)


@dataclass(frozen=True)
class SweepCell:
    """One point of a grid: which lambda, LayerNorm and gating setting to run"""
    index: int
    run_id: str
    lam: float
    layernorm: bool
    gating: bool
    config: RunConfig = field(compare=False)


def trace_rows(cell: SweepCell, trace: RankTrace, token: Optional[str] = None) -> List[SweepRow]:
    """Rows for layers 0..K; layers missing from a partial trace carry `token`"""
    cfg = cell.config
    rows = []
    for k in range(cfg.k_layers + 1):
        if k < len(trace.samples):
            s = trace.samples[k]
            metrics = (s.mu, s.normalized_mu, s.phi, s.y_frob)
        else:
            metrics = (token,) * 4
        rows.append(SweepRow(cell.run_id, cfg.seed, cfg.block, k, cell.lam, *metrics))
    return rows


def run_cell(cell: SweepCell) -> List[SweepRow]:
    cfg = cell.config
    weights = sweep_model(cfg)
    model = weights.build(cfg.n, cfg.d, cell.lam, cell.layernorm, cell.gating)
    try:
        trace = model_forward(weights.y0, model, normalize_input=cfg.normalize_input)
    except NonFinite as e:
        logger.warning("Cell overflowed", run_id=cell.run_id, layer=e.layer)
        return trace_rows(cell, e.partial_trace, OVERFLOW_TOKEN)
    except ZeroRow as e:
        logger.warning("Cell degenerated", run_id=cell.run_id, layer=e.layer, row=e.row)
        return trace_rows(cell, e.partial_trace, DEGENERATE_TOKEN)
    logger.debug("Cell finished", run_id=cell.run_id, final_mu=trace.final().mu)
    return trace_rows(cell, trace)


def run_cells(cells: List[SweepCell], workers: int = 1) -> List[SweepRow]:
    if workers > 1 and len(cells) > 1:
        with Pool(min(workers, len(cells))) as pool:
            # map keeps the input order
            per_cell = pool.map(run_cell, cells)
    else:
        per_cell = [run_cell(cell) for cell in cells]
    rows = [row for cell_rows in per_cell for row in cell_rows]
    logger.info("Grid finished", cells=len(cells), rows=len(rows))
    return rows


def _on(flag: bool) -> str:
    return "on" if flag else "off"


def sweep_cells(config: RunConfig) -> List[SweepCell]:
    return [
        SweepCell(i, f"{config.block}:lambda={lam!r}", float(lam),
                  config.layernorm, config.gating, config)
        for i, lam in enumerate(config.lambda_list)
    ]


def run_lambda_sweep(config: RunConfig) -> List[SweepRow]:
    """One cell per lambda; the same seed gives the same weights in every cell"""
    config.validate()
    logger.info("Starting lambda sweep", block=config.block, lambdas=len(config.lambda_list),
                layers=config.k_layers, seed=config.seed)
    return run_cells(sweep_cells(config), config.workers)


def ablation_cells(config: RunConfig, grid: str = "gating") -> List[SweepCell]:
    """
    `gating`: {gating on, off} x {LayerNorm on, off} per lambda; selective only.
    `skip`: {lambda = 0, lambda} x {LayerNorm on, off} for any block.
    """
    cells: List[SweepCell] = []
    if grid == "gating":
        if config.block != "selective":
            raise SpecError(f"gating ablation needs a selective block, got {config.block}")
        for lam in config.lambda_list:
            for gating in (False, True):
                for layernorm in (True, False):
                    run_id = f"{config.block}:lambda={lam!r}:gating={_on(gating)}:ln={_on(layernorm)}"
                    cells.append(SweepCell(len(cells), run_id, float(lam), layernorm, gating, config))
    elif grid == "skip":
        lambdas = [0.0] + [float(lam) for lam in config.lambda_list if lam != 0.0]
        for lam in lambdas:
            for layernorm in (True, False):
                run_id = f"{config.block}:lambda={lam!r}:ln={_on(layernorm)}"
                cells.append(SweepCell(len(cells), run_id, lam, layernorm, config.gating, config))
    else:
        raise ConfigurationError(f"Unknown ablation grid '{grid}'")
    return cells


def run_ablation(config: RunConfig, grid: str = "gating") -> List[SweepRow]:
    config.validate()
    cells = ablation_cells(config, grid)
    logger.info("Starting ablation", grid=grid, block=config.block, cells=len(cells))
    return run_cells(cells, config.workers)


# =============================================================================
# CSV
# =============================================================================

def rows_to_frame(rows: List[SweepRow]) -> pd.DataFrame:
    return pd.DataFrame([row.to_record() for row in rows], columns=CSV_HEADER, dtype=str)


def rows_to_csv(rows: List[SweepRow]) -> str:
    return rows_to_frame(rows).to_csv(index=False, lineterminator="\n")


def write_sweep_csv(rows: List[SweepRow], target: Union[str, TextIO]) -> None:
    text = rows_to_csv(rows)
    if isinstance(target, str):
        with open(target, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
    else:
        target.write(text)


def read_sweep_csv(source: Union[str, TextIO]) -> List[SweepRow]:
    if isinstance(source, str) and '\n' in source:
        source = io.StringIO(source)
    frame = pd.read_csv(source, dtype=str, keep_default_na=False)
    if list(frame.columns) != CSV_HEADER:
        raise ConfigurationError(f"CSV header {list(frame.columns)} does not match the sweep schema")
    return [SweepRow.from_record(record) for record in frame.to_dict(orient='records')]


# =============================================================================
# SCORING
# =============================================================================

@dataclass
class RunScore:
    """Collapse statistics of one run_id in a sweep CSV"""
    run_id: str
    lam: float
    layers: int
    min_rate: float
    final_normalized_mu: float
    envelope_held: bool
    flagged: bool

    def to_dict(self) -> Dict:
        return {
            'run_id': self.run_id,
            'lambda': self.lam,
            'layers': self.layers,
            'min_rate': self.min_rate,
            'final_normalized_mu': self.final_normalized_mu,
            'envelope_held': self.envelope_held,
            'flagged': self.flagged,
        }


def score_rows(rows: List[SweepRow], a: float, tolerance: float = 1e-9) -> List[RunScore]:
    """
    Per run: min over k of mu_(k+1)^2 / mu_k^2, the last finite normalized mu,
    and whether mu_k^2 >= a^k mu_0^2 held on every finite layer.
    """
    groups: Dict[str, List[SweepRow]] = {}
    for row in rows:
        groups.setdefault(row.run_id, []).append(row)

    scores = []
    for run_id, group in groups.items():
        group = sorted(group, key=lambda r: r.layer)
        finite = [r for r in group if not r.flagged]
        mus_sq = [float(r.mu) ** 2 for r in finite]
        rates = [mus_sq[j + 1] / mus_sq[j] for j in range(len(mus_sq) - 1) if mus_sq[j] > 0]
        held = all(
            mus_sq[j] >= (a ** finite[j].layer) * mus_sq[0] - tolerance for j in range(len(finite))
        ) if finite else False
        scores.append(RunScore(
            run_id=run_id,
            lam=group[0].lam,
            layers=group[-1].layer,
            min_rate=min(rates) if rates else math.nan,
            final_normalized_mu=float(finite[-1].normalized_mu) if finite else math.nan,
            envelope_held=held,
            flagged=len(finite) < len(group),
        ))
    return scores


def score_sweep_csv(path: str, a: float) -> List[RunScore]:
    if not 0 < a <= 1:
        raise ConfigurationError(f"collapse rate must lie in (0, 1], got {a}")
    scores = score_rows(read_sweep_csv(path), a)
    logger.info("Scored sweep", path=path, runs=len(scores))
    return scores


__all__ = [
    'CSV_HEADER',
    'OVERFLOW_TOKEN',
    'DEGENERATE_TOKEN',
    'SweepRow',
    'SweepCell',
    'RunScore',
    'run_cell',
    'run_cells',
    'sweep_cells',
    'run_lambda_sweep',
    'ablation_cells',
    'run_ablation',
    'rows_to_frame',
    'rows_to_csv',
    'write_sweep_csv',
    'read_sweep_csv',
    'score_rows',
    'score_sweep_csv',
]
