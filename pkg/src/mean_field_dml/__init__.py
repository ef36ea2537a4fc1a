"""Pair-based and mean-field metric learning losses with analytic gradients, and the tools to train and evaluate them."""

from mean_field_dml.models import Batch, Dataset, LossResult, MeanFieldBank, RetrievalReport
from mean_field_dml.schema import DistanceKind, LossKind, ModelKind, OptimizerKind

__all__ = [
    "Batch",
    "Dataset",
    "LossResult",
    "MeanFieldBank",
    "RetrievalReport",
    "DistanceKind",
    "LossKind",
    "ModelKind",
    "OptimizerKind",
]
