"""Same-set k-NN retrieval metrics: P@1, R-Precision and MAP@R.

Every sample queries all other samples. Neighbors are sorted by ascending
distance and ties go to the lower index, so reports are reproducible.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np

from mean_field_dml.errors import DataError, ShapeError
from mean_field_dml.models import RetrievalReport
from mean_field_dml.numerics import row_normalize, self_distances
from mean_field_dml.schema import DistanceKind

REPORT_KEYS = ("p_at_1", "r_precision", "map_at_r")


def rank_neighbors(embeddings: np.ndarray, labels: np.ndarray, kind: DistanceKind) -> np.ndarray:
    """(n, n - 1) array; row q lists every other index by increasing distance to q."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    n = embeddings.shape[0] if embeddings.ndim == 2 else 0
    if n < 2:
        raise ShapeError(f"retrieval needs at least 2 embeddings, got {n}")
    if np.asarray(labels).shape != (n,):
        raise ShapeError(f"{n} embeddings but {np.asarray(labels).shape} labels")
    dist = self_distances(embeddings, kind)
    np.fill_diagonal(dist, np.inf)
    return np.argsort(dist, axis=1, kind="stable")[:, :-1]


def evaluate(embeddings: np.ndarray, labels: np.ndarray, kind: DistanceKind) -> RetrievalReport:
    labels = np.asarray(labels, dtype=np.int64)
    class_ids, dense, counts = np.unique(labels, return_inverse=True, return_counts=True)
    singletons = class_ids[counts < 2]
    if singletons.size:
        raise DataError(f"classes {singletons.tolist()} have a single sample; every query needs a relevant neighbor")

    ranks = rank_neighbors(embeddings, labels, kind)
    relevant = labels[ranks] == labels[:, None]
    r = (counts[dense.reshape(-1)] - 1).astype(np.float64)
    cutoffs = np.arange(1, ranks.shape[1] + 1, dtype=np.float64)
    within_r = cutoffs[None, :] <= r[:, None]

    hits = np.cumsum(relevant, axis=1)
    p_at_1 = relevant[:, 0].astype(np.float64)
    r_precision = np.sum(relevant & within_r, axis=1) / r
    map_at_r = np.sum(np.where(relevant & within_r, hits / cutoffs[None, :], 0.0), axis=1) / r
    return RetrievalReport(
        p_at_1=float(np.mean(p_at_1)),
        r_precision=float(np.mean(r_precision)),
        map_at_r=float(np.mean(map_at_r)),
        per_query_p_at_1=p_at_1,
        per_query_r_precision=r_precision,
        per_query_map_at_r=map_at_r,
    )


def concatenate_embeddings(blocks: Sequence[np.ndarray], kind: DistanceKind) -> np.ndarray:
    """Join per-model embeddings column-wise; Cosine blocks are unit-normalised first."""
    if not blocks:
        raise ShapeError("nothing to concatenate")
    arrays = [np.asarray(block, dtype=np.float64) for block in blocks]
    rows = {array.shape[0] for array in arrays}
    if len(rows) != 1 or any(array.ndim != 2 for array in arrays):
        raise ShapeError(f"embedding blocks disagree on row count: {[array.shape for array in arrays]}")
    if kind == DistanceKind.COSINE:
        arrays = [row_normalize(array) for array in arrays]
    return np.concatenate(arrays, axis=1)


def format_report(report: RetrievalReport, extra: Mapping[str, object] | None = None) -> str:
    lines = [f"{key}={value!r}" for key, value in report.summary().items()]
    for key, value in (extra or {}).items():
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep or not key:
            raise DataError(f"report line {number} is not key=value: {line!r}")
        values[key.strip()] = value.strip()
    return values
