"""Wall-time scaling of loss value + gradient evaluation against batch size."""

from __future__ import annotations

import logging
import time
from collections.abc import Sequence

import numpy as np
from scipy.stats import linregress
from threadpoolctl import threadpool_limits

from mean_field_dml.errors import ConfigError
from mean_field_dml.losses import compute_loss, default_params
from mean_field_dml.meanfield import init_bank
from mean_field_dml.models import Batch, BenchRow, MeanFieldBank
from mean_field_dml.schema import DistanceKind, InitScheme, LossKind, LossParams

logger = logging.getLogger(__name__)

WARMUP_RUNS = 3
BLAS_THREADS = 1
MIN_REPEATS = 5
BENCH_HEADER = ("loss", "B", "C", "d", "mean_ns", "std_ns", "repeats")


def bench_inputs(batch_size: int, num_classes: int, dim: int, seed: int) -> tuple[Batch, MeanFieldBank]:
    """Gaussian embeddings with round-robin labels, and a unit-random bank of C rows."""
    rng = np.random.default_rng([seed, batch_size])
    embeddings = rng.standard_normal((batch_size, dim))
    labels = np.arange(batch_size) % num_classes
    bank = init_bank(num_classes, dim, InitScheme.UNIT_RANDOM, seed)
    return Batch(embeddings=embeddings, labels=labels), bank


def bench_loss_scaling(
    losses: Sequence[LossKind],
    batch_sizes: Sequence[int],
    num_classes: int,
    dim: int,
    repeats: int,
    seed: int,
    distance: DistanceKind = DistanceKind.COSINE,
) -> list[BenchRow]:
    if repeats < MIN_REPEATS:
        raise ConfigError(f"bench.repeats must be >= {MIN_REPEATS}, got {repeats}")
    if any(b < 1 for b in batch_sizes) or list(batch_sizes) != sorted(set(batch_sizes)):
        raise ConfigError(f"batch sizes must be positive and strictly ascending, got {list(batch_sizes)}")
    if num_classes < 1 or dim < 1:
        raise ConfigError(f"bench needs C, d >= 1, got C={num_classes}, d={dim}")

    rows: list[BenchRow] = []
    # BLAS and OpenMP pools are pinned to one thread while timing.
    with threadpool_limits(limits=BLAS_THREADS):
        for kind in losses:
            params = default_params(kind)
            for batch_size in batch_sizes:
                rows.append(_time_loss(kind, params, batch_size, num_classes, dim, repeats, seed, distance))
    return rows


def _time_loss(
    kind: LossKind,
    params: LossParams,
    batch_size: int,
    num_classes: int,
    dim: int,
    repeats: int,
    seed: int,
    distance: DistanceKind,
) -> BenchRow:
    batch, bank = bench_inputs(batch_size, num_classes, dim, seed)
    for _ in range(WARMUP_RUNS):
        compute_loss(kind, batch, params, distance, bank)
    timings = np.empty(repeats)
    for i in range(repeats):
        start = time.perf_counter_ns()
        compute_loss(kind, batch, params, distance, bank)
        timings[i] = time.perf_counter_ns() - start
    logger.debug("%s B=%d mean=%.0fns std=%.0fns", kind.value, batch_size, timings.mean(), timings.std())
    return BenchRow(
        loss=kind.value,
        batch_size=batch_size,
        num_classes=num_classes,
        dim=dim,
        mean_ns=float(timings.mean()),
        std_ns=float(timings.std(ddof=1)),
        repeats=repeats,
    )


def fit_loglog_slope(rows: Sequence[BenchRow]) -> float:
    """Least-squares slope of log(mean time) against log(B)."""
    names = {row.loss for row in rows}
    if len(names) > 1:
        raise ConfigError(f"slope fit expects rows of a single loss, got {sorted(names)}")
    sizes = np.array([row.batch_size for row in rows], dtype=np.float64)
    if np.unique(sizes).size < 3:
        raise ConfigError(f"slope fit needs at least 3 distinct batch sizes, got {np.unique(sizes).tolist()}")
    times = np.array([row.mean_ns for row in rows], dtype=np.float64)
    return float(linregress(np.log(sizes), np.log(times)).slope)


def slopes_by_loss(rows: Sequence[BenchRow]) -> dict[str, float]:
    grouped: dict[str, list[BenchRow]] = {}
    for row in rows:
        grouped.setdefault(row.loss, []).append(row)
    return {name: fit_loglog_slope(group) for name, group in grouped.items()}
