"""Sequential grid search over numeric config fields, with repeated seeds per point."""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy import stats

from mean_field_dml.errors import ConfigError
from mean_field_dml.models import Dataset
from mean_field_dml.runners.training import train

if TYPE_CHECKING:
    from mean_field_dml.config import DataSource, RunConfig

logger = logging.getLogger(__name__)

_BARE_FIELDS = {
    "m_p": "loss",
    "m_n": "loss",
    "alpha": "loss",
    "beta": "loss",
    "delta": "loss",
    "lambda_mf": "loss",
    "embedding_dim": "model",
    "hidden_dim": "model",
    "model_lr": "optimizer",
    "meanfield_lr": "optimizer",
    "weight_decay": "optimizer",
    "momentum": "optimizer",
    "rms_decay": "optimizer",
    "classes_per_batch": "sampler",
    "samples_per_class": "sampler",
    "max_epochs": "training",
    "patience": "training",
    "eval_every": "training",
}

Grid = list[tuple[str, list[float]]]


@dataclass(slots=True)
class RunSummary:
    mean: float
    ci95: float
    n: int


@dataclass(slots=True)
class SweepRow:
    point: dict[str, float]
    map_at_r: RunSummary
    best_epoch: float

    def as_csv_row(self, fields: Sequence[str]) -> list[object]:
        return [
            *(_format_number(self.point[name]) for name in fields),
            repr(self.map_at_r.mean),
            repr(self.map_at_r.ci95),
            repr(self.best_epoch),
            self.map_at_r.n,
        ]


def parse_grid(expression: str) -> Grid:
    """Parse `beta=50:90:5,delta=0.6:1.0:0.1` or `lambda_mf=0,0.01,0.1`.

    `a:b:s` is the inclusive range a, a+s, ... <= b. A comma-separated item
    without `=` adds a value to the preceding field. Bare names such as `beta`
    resolve to their config section (`loss.beta`).
    """
    grid: Grid = []
    for item in (part.strip() for part in expression.split(",")):
        if not item:
            raise ConfigError(f"grid: empty item in {expression!r}")
        name, sep, spec = item.partition("=")
        if sep:
            grid.append((_resolve_field(name.strip()), _parse_values(spec.strip(), name.strip())))
        elif grid:
            grid[-1][1].extend(_parse_values(item, grid[-1][0]))
        else:
            raise ConfigError(f"grid: {item!r} does not name a field")
    if not grid:
        raise ConfigError("grid: no fields given")
    names = [name for name, _ in grid]
    if len(set(names)) != len(names):
        raise ConfigError(f"grid: a field appears twice in {names}")
    return grid


def grid_points(grid: Grid) -> list[dict[str, float]]:
    names = [name for name, _ in grid]
    return [dict(zip(names, values)) for values in itertools.product(*(values for _, values in grid))]


def summarize_runs(values: Sequence[float]) -> RunSummary:
    """Mean and Student-t 95% half-width of repeated measurements."""
    data = np.asarray(values, dtype=np.float64)
    if data.size == 0:
        raise ConfigError("cannot summarise zero runs")
    if data.size == 1:
        return RunSummary(mean=float(data[0]), ci95=0.0, n=1)
    half_width = stats.t.ppf(0.975, data.size - 1) * data.std(ddof=1) / math.sqrt(data.size)
    return RunSummary(mean=float(data.mean()), ci95=float(half_width), n=int(data.size))


def run_sweep(run_config: RunConfig, grid: Grid, repeats: int = 1) -> list[SweepRow]:
    """Train every grid point `repeats` times with seeds seed, seed + 1, ..."""
    if repeats < 1:
        raise ConfigError(f"sweep.repeats must be >= 1, got {repeats}")
    points = grid_points(grid)
    configs = [run_config.with_overrides(point) for point in points]
    datasets: dict[DataSource, tuple[Dataset, Dataset]] = {}
    rows: list[SweepRow] = []
    for point, config in zip(points, configs):
        if config.data not in datasets:
            datasets[config.data] = config.data.load()
        train_ds, eval_ds = datasets[config.data]
        scores: list[float] = []
        epochs: list[int] = []
        for offset in range(repeats):
            seeded = config.with_overrides({"training.seed": config.train.seed + offset})
            result = train(seeded.train, train_ds, eval_ds)
            scores.append(result.best_report.map_at_r)
            epochs.append(result.best_epoch)
        summary = summarize_runs(scores)
        logger.info("grid point %s: map_at_r=%.4f +/- %.4f", point, summary.mean, summary.ci95)
        rows.append(SweepRow(point=point, map_at_r=summary, best_epoch=float(np.mean(epochs))))
    return rows


def sweep_header(grid: Grid) -> list[str]:
    return [*(name for name, _ in grid), "map_at_r", "map_at_r_ci95", "best_epoch", "repeats"]


def _resolve_field(name: str) -> str:
    if not name:
        raise ConfigError("grid: missing field name")
    if "." in name:
        return name
    section = _BARE_FIELDS.get(name)
    if section is None:
        raise ConfigError(f"grid: unknown field {name!r}; use a dotted config key such as loss.beta")
    return f"{section}.{name}"


def _parse_values(spec: str, name: str) -> list[float]:
    if ":" not in spec:
        return [_number(spec, name)]
    parts = spec.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid: {name} range must be start:stop:step, got {spec!r}")
    start, stop, step = (_number(part, name) for part in parts)
    if step <= 0 or stop < start:
        raise ConfigError(f"grid: {name} range {spec!r} needs step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def _number(text: str, name: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"grid: {name} value {text!r} is not a number") from None
    if not math.isfinite(value):
        raise ConfigError(f"grid: {name} value {text!r} is not finite")
    return value


def _format_number(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(value)
