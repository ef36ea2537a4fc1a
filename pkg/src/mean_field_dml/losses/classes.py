from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mean_field_dml.errors import ShapeError
from mean_field_dml.models import Batch, MeanFieldBank


@dataclass(slots=True)
class BatchClasses:
    """Class membership of a batch: which classes are present and how many rows each has."""

    present: np.ndarray
    dense_labels: np.ndarray
    counts: np.ndarray

    @classmethod
    def of(cls, batch: Batch) -> BatchClasses:
        present, dense, counts = np.unique(batch.labels, return_inverse=True, return_counts=True)
        return cls(present=present, dense_labels=dense.reshape(-1), counts=counts.astype(np.float64))

    @property
    def num_present(self) -> int:
        return int(self.present.size)

    def sample_counts(self) -> np.ndarray:
        """|D_c| for the class of every row."""
        return self.counts[self.dense_labels]


def require_bank_coverage(batch: Batch, bank: MeanFieldBank) -> None:
    if batch.dim != bank.dim:
        raise ShapeError(f"batch dimension {batch.dim} does not match mean-field dimension {bank.dim}")
    top = int(batch.labels.max())
    if top >= bank.num_classes:
        raise ShapeError(f"label {top} is outside the mean-field bank of {bank.num_classes} classes")
