from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from mean_field_dml.errors import ShapeError


@dataclass(slots=True)
class Batch:
    """Embedding rows with their class labels; the unit a loss is evaluated on."""

    embeddings: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.embeddings.ndim != 2 or self.embeddings.shape[0] == 0 or self.embeddings.shape[1] == 0:
            raise ShapeError(f"batch embeddings must be a non-empty B x d matrix, got shape {self.embeddings.shape}")
        if self.labels.shape != (self.embeddings.shape[0],):
            raise ShapeError(
                f"batch has {self.embeddings.shape[0]} rows but {self.labels.shape} labels"
            )
        if np.any(self.labels < 0):
            raise ShapeError("batch labels must be non-negative class ids")
        if not np.all(np.isfinite(self.embeddings)):
            raise ShapeError("batch embeddings contain non-finite entries")

    @property
    def size(self) -> int:
        return int(self.embeddings.shape[0])

    @property
    def dim(self) -> int:
        return int(self.embeddings.shape[1])


@dataclass(slots=True)
class MeanFieldBank:
    """One learnable vector per training class, rows indexed by class id."""

    vectors: np.ndarray
    class_ids: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self) -> None:
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 1 or self.vectors.shape[1] < 1:
            raise ShapeError(f"mean-field bank must be a C x d matrix with C, d >= 1, got {self.vectors.shape}")
        if self.class_ids.size == 0:
            self.class_ids = np.arange(self.vectors.shape[0], dtype=np.int64)
        self.class_ids = np.asarray(self.class_ids, dtype=np.int64)
        if not np.array_equal(self.class_ids, np.arange(self.vectors.shape[0])):
            raise ShapeError("mean-field class ids must be unique and contiguous from 0")
        if not np.all(np.isfinite(self.vectors)):
            raise ShapeError("mean-field bank contains non-finite rows")

    @property
    def num_classes(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


@dataclass(slots=True)
class LossResult:
    value: float
    grad_embeddings: np.ndarray
    grad_meanfields: np.ndarray | None = None


@dataclass(slots=True)
class Dataset:
    """Feature rows, integer class labels and a display name."""

    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ShapeError(f"dataset features must be an n x f matrix with n >= 1, got {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise ShapeError(f"dataset has {self.features.shape[0]} rows but {self.labels.shape} labels")

    @property
    def size(self) -> int:
        return int(self.features.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def class_ids(self) -> np.ndarray:
        return np.unique(self.labels)

    @property
    def num_classes(self) -> int:
        return int(self.class_ids.size)

    def class_counts(self) -> dict[int, int]:
        ids, counts = np.unique(self.labels, return_counts=True)
        return {int(c): int(n) for c, n in zip(ids, counts)}

    def remapped(self) -> Dataset:
        """Relabel classes to 0..|C|-1 in ascending order of the original ids."""
        _, dense = np.unique(self.labels, return_inverse=True)
        return Dataset(features=self.features, labels=dense.astype(np.int64), name=self.name)

    def subset(self, mask: np.ndarray, name: str) -> Dataset:
        return Dataset(features=self.features[mask], labels=self.labels[mask], name=name)

    def fingerprint(self) -> str:
        """SHA-256 over shape, features and labels; identifies the exact rows a table model was trained on."""
        digest = hashlib.sha256()
        digest.update(np.asarray(self.features.shape, dtype="<i8").tobytes())
        digest.update(np.ascontiguousarray(self.features, dtype="<f8").tobytes())
        digest.update(np.ascontiguousarray(self.labels, dtype="<i8").tobytes())
        return digest.hexdigest()


@dataclass(slots=True)
class RetrievalReport:
    p_at_1: float
    r_precision: float
    map_at_r: float
    per_query_p_at_1: np.ndarray
    per_query_r_precision: np.ndarray
    per_query_map_at_r: np.ndarray

    def summary(self) -> dict[str, float]:
        return {"p_at_1": self.p_at_1, "r_precision": self.r_precision, "map_at_r": self.map_at_r}


@dataclass(slots=True)
class LogRecord:
    epoch: int
    step: int
    loss: float | None
    wall_time: float
    metrics: dict[str, float] = field(default_factory=dict)

    def as_json(self) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "epoch": self.epoch,
            "step": self.step,
            "loss": self.loss,
            "wall_time": self.wall_time,
        }
        payload.update(self.metrics)
        return payload


@dataclass(slots=True)
class BenchRow:
    loss: str
    batch_size: int
    num_classes: int
    dim: int
    mean_ns: float
    std_ns: float
    repeats: int

    def as_csv_row(self) -> list[object]:
        return [
            self.loss,
            self.batch_size,
            self.num_classes,
            self.dim,
            f"{self.mean_ns:.1f}",
            f"{self.std_ns:.1f}",
            self.repeats,
        ]


@dataclass(slots=True)
class SpinSystem:
    """N spins with exchange J at temperature T; rows are unit 3-vectors or +/-1 scalars."""

    spins: np.ndarray
    exchange: float = 1.0
    temperature: float = 1.0

    def __post_init__(self) -> None:
        spins = np.asarray(self.spins, dtype=np.float64)
        if spins.ndim == 1:
            spins = spins[:, None]
        if spins.ndim != 2 or spins.shape[0] < 1:
            raise ShapeError(f"spins must be N values or N x 3 vectors, got shape {spins.shape}")
        self.spins = spins
        if self.exchange <= 0 or self.temperature <= 0:
            raise ShapeError("exchange J and temperature T must be positive")
        if self.is_ising:
            if not np.all(np.isin(spins, (-1.0, 1.0))):
                raise ShapeError("Ising spins must be -1 or +1")
        elif spins.shape[1] == 3:
            if not np.allclose(np.linalg.norm(spins, axis=1), 1.0, rtol=0.0, atol=1e-12):
                raise ShapeError("vector spins must have unit norm")
        else:
            raise ShapeError(f"spins must be scalars or 3-vectors, got dimension {spins.shape[1]}")

    @property
    def size(self) -> int:
        return int(self.spins.shape[0])

    @property
    def is_ising(self) -> bool:
        return self.spins.shape[1] == 1


@dataclass(slots=True)
class MFTSolution:
    magnetization: float
    residual: float
    iterations: int


@dataclass(slots=True)
class GibbsMoments:
    """Exact Ising averages over all 2^N configurations."""

    log_partition: float
    mean_spin: float
    mean_abs_spin: float

    @property
    def partition(self) -> float:
        """Z itself; inf once log Z exceeds the float64 range (cold magnets with large N*J/T)."""
        with np.errstate(over="ignore"):
            return float(np.exp(self.log_partition))


@dataclass(slots=True)
class MagnetRow:
    reduced_temperature: float
    magnetization: float
    exact_abs_magnetization: float | None

    def as_csv_row(self) -> list[object]:
        exact = "" if self.exact_abs_magnetization is None else repr(self.exact_abs_magnetization)
        return [repr(self.reduced_temperature), repr(self.magnetization), exact]
