from __future__ import annotations

import logging

import numpy as np

from mean_field_dml.errors import ShapeError
from mean_field_dml.losses.mean_field import mfcont_loss
from mean_field_dml.models import Batch, MeanFieldBank
from mean_field_dml.schema import DistanceKind, InitScheme, MFContParams

logger = logging.getLogger(__name__)

NORM_FLOOR = 1e-6


def init_bank(num_classes: int, dim: int, scheme: InitScheme, seed: int) -> MeanFieldBank:
    """Seeded mean-field initialisation: unit-sphere rows or i.i.d. N(0, 1/d) entries."""
    if num_classes < 1 or dim < 1:
        raise ShapeError(f"mean-field bank needs at least one class and one dimension, got {num_classes} x {dim}")
    rng = np.random.default_rng(seed)
    vectors = rng.standard_normal((num_classes, dim))
    if scheme == InitScheme.UNIT_RANDOM:
        vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    else:
        vectors /= np.sqrt(dim)
    return MeanFieldBank(vectors=vectors)


def class_centroids(batch: Batch) -> tuple[np.ndarray, np.ndarray]:
    """Per-class arithmetic means of the batch rows, in ascending class order."""
    class_ids, dense, counts = np.unique(batch.labels, return_inverse=True, return_counts=True)
    sums = np.zeros((class_ids.size, batch.dim))
    np.add.at(sums, dense.reshape(-1), batch.embeddings)
    return class_ids, sums / counts[:, None]


def stationarity_residual(bank: MeanFieldBank, data: Batch, params: MFContParams) -> np.ndarray:
    """Per-class norm of the MFCont gradient with respect to each mean field.

    Each norm is scaled by the number of classes so it measures the gradient of
    the class's own averaged term; at the class centroid with m_P = 0 and inactive
    negatives it vanishes, and displacing M_c by v gives 2 * |v|.
    Squared Euclidean distance is used throughout.
    """
    present = np.unique(data.labels)
    missing = np.setdiff1d(bank.class_ids, present)
    if missing.size:
        raise ShapeError(f"no samples for mean-field classes {missing.tolist()}")
    result = mfcont_loss(data, bank, params, DistanceKind.SQ_EUCLIDEAN)
    assert result.grad_meanfields is not None
    return present.size * np.linalg.norm(result.grad_meanfields, axis=1)


def check_bank_norms(bank: MeanFieldBank, floor: float = NORM_FLOOR) -> list[int]:
    """Warn about mean-field rows whose norm drifted below `floor`; returns their class ids."""
    norms = np.linalg.norm(bank.vectors, axis=1)
    collapsed = [int(c) for c in bank.class_ids[norms < floor]]
    if collapsed:
        logger.warning("mean-field rows with norm below %g: %s", floor, collapsed)
    return collapsed
