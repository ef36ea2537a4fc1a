from __future__ import annotations

from typing import Protocol

import numpy as np

from mean_field_dml.embedding import ForwardCache, ModelParams
from mean_field_dml.models import Batch, Dataset, LossResult, MeanFieldBank


class EmbeddingModel(Protocol):
    """F_theta: maps dataset rows to embedding vectors with an exact backward pass."""

    @property
    def embedding_dim(self) -> int:
        ...

    def init_params(self, rng: np.random.Generator) -> ModelParams:
        ...

    def inputs_for(self, dataset: Dataset, indices: np.ndarray | None = None) -> np.ndarray:
        ...

    def forward(self, params: ModelParams, inputs: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
        ...

    def backward(self, params: ModelParams, cache: ForwardCache, grad_embeddings: np.ndarray) -> dict[str, np.ndarray]:
        ...


class BatchSampler(Protocol):
    """Draws the dataset indices of one mini-batch from an explicit generator."""

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        ...


class LossFunction(Protocol):
    """A loss bound to its hyperparameters and distance; pair-based losses ignore the bank."""

    def __call__(self, batch: Batch, bank: MeanFieldBank | None) -> LossResult:
        ...
