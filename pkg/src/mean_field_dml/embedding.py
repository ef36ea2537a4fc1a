"""Small trainable backbones with hand-written reverse-mode gradients.

Parameters live in a `ModelParams` container whose version counter is bumped on
every update, so a forward cache can detect that it has gone stale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from mean_field_dml.errors import ConfigError, ShapeError, StaleCacheError
from mean_field_dml.models import Dataset
from mean_field_dml.schema import ModelKind

if TYPE_CHECKING:
    from mean_field_dml.interfaces import EmbeddingModel


@dataclass(slots=True)
class ModelParams:
    arrays: dict[str, np.ndarray]
    version: int = 0

    def replace(self, arrays: dict[str, np.ndarray]) -> ModelParams:
        return ModelParams(arrays=arrays, version=self.version + 1)

    def copy(self) -> ModelParams:
        return ModelParams(arrays={name: value.copy() for name, value in self.arrays.items()}, version=self.version)


@dataclass(slots=True)
class ForwardCache:
    kind: ModelKind
    version: int
    inputs: np.ndarray
    extras: dict[str, np.ndarray] = field(default_factory=dict)


class TableModel:
    """One free embedding row per training sample; inputs are row indices."""

    kind = ModelKind.TABLE

    def __init__(self, num_rows: int, embedding_dim: int) -> None:
        if num_rows < 1 or embedding_dim < 1:
            raise ConfigError(f"table model needs rows and dimension >= 1, got {num_rows} x {embedding_dim}")
        self._num_rows = num_rows
        self._embedding_dim = embedding_dim

    @property
    def embedding_dim(self) -> int:
        return self._embedding_dim

    def init_params(self, rng: np.random.Generator) -> ModelParams:
        table = rng.standard_normal((self._num_rows, self._embedding_dim))
        table /= np.linalg.norm(table, axis=1, keepdims=True)
        return ModelParams(arrays={"table": table})

    def inputs_for(self, dataset: Dataset, indices: np.ndarray | None = None) -> np.ndarray:
        if dataset.size != self._num_rows:
            raise ShapeError(f"table model has {self._num_rows} rows, dataset has {dataset.size}")
        return np.arange(dataset.size) if indices is None else np.asarray(indices, dtype=np.int64)

    def forward(self, params: ModelParams, inputs: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
        indices = np.asarray(inputs)
        if indices.ndim != 1 or not np.issubdtype(indices.dtype, np.integer):
            raise ShapeError("table model expects a 1-D array of row indices")
        if indices.size and (indices.min() < 0 or indices.max() >= self._num_rows):
            raise ShapeError(f"row index outside table of {self._num_rows} rows")
        embeddings = params.arrays["table"][indices]
        return embeddings, ForwardCache(kind=self.kind, version=params.version, inputs=indices)

    def backward(self, params: ModelParams, cache: ForwardCache, grad_embeddings: np.ndarray) -> dict[str, np.ndarray]:
        _check_cache(self.kind, params, cache, grad_embeddings, self._embedding_dim)
        grad_table = np.zeros_like(params.arrays["table"])
        np.add.at(grad_table, cache.inputs, grad_embeddings)
        return {"table": grad_table}


class LinearModel:
    """Affine map from f features to d embedding coordinates."""

    kind = ModelKind.LINEAR

    def __init__(self, feature_dim: int, embedding_dim: int) -> None:
        if feature_dim < 1 or embedding_dim < 1:
            raise ConfigError(f"linear model needs positive dimensions, got {feature_dim} -> {embedding_dim}")
        self._feature_dim = feature_dim
        self._embedding_dim = embedding_dim

    @property
    def embedding_dim(self) -> int:
        return self._embedding_dim

    def init_params(self, rng: np.random.Generator) -> ModelParams:
        return ModelParams(
            arrays={
                "weight": _uniform_fan_in(rng, self._feature_dim, self._embedding_dim),
                "bias": np.zeros(self._embedding_dim),
            }
        )

    def inputs_for(self, dataset: Dataset, indices: np.ndarray | None = None) -> np.ndarray:
        return dataset.features if indices is None else dataset.features[indices]

    def forward(self, params: ModelParams, inputs: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
        features = _check_features(inputs, self._feature_dim)
        embeddings = features @ params.arrays["weight"] + params.arrays["bias"]
        return embeddings, ForwardCache(kind=self.kind, version=params.version, inputs=features)

    def backward(self, params: ModelParams, cache: ForwardCache, grad_embeddings: np.ndarray) -> dict[str, np.ndarray]:
        _check_cache(self.kind, params, cache, grad_embeddings, self._embedding_dim)
        return {
            "weight": cache.inputs.T @ grad_embeddings,
            "bias": grad_embeddings.sum(axis=0),
        }


class MLPModel:
    """f -> h -> d with a ReLU hidden layer."""

    kind = ModelKind.MLP1

    def __init__(self, feature_dim: int, hidden_dim: int, embedding_dim: int) -> None:
        if min(feature_dim, hidden_dim, embedding_dim) < 1:
            raise ConfigError(f"mlp model needs positive dimensions, got {feature_dim} -> {hidden_dim} -> {embedding_dim}")
        self._feature_dim = feature_dim
        self._hidden_dim = hidden_dim
        self._embedding_dim = embedding_dim

    @property
    def embedding_dim(self) -> int:
        return self._embedding_dim

    def init_params(self, rng: np.random.Generator) -> ModelParams:
        return ModelParams(
            arrays={
                "hidden_weight": _uniform_fan_in(rng, self._feature_dim, self._hidden_dim),
                "hidden_bias": np.zeros(self._hidden_dim),
                "output_weight": _uniform_fan_in(rng, self._hidden_dim, self._embedding_dim),
                "output_bias": np.zeros(self._embedding_dim),
            }
        )

    def inputs_for(self, dataset: Dataset, indices: np.ndarray | None = None) -> np.ndarray:
        return dataset.features if indices is None else dataset.features[indices]

    def forward(self, params: ModelParams, inputs: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
        features = _check_features(inputs, self._feature_dim)
        pre_activation = features @ params.arrays["hidden_weight"] + params.arrays["hidden_bias"]
        hidden = np.maximum(pre_activation, 0.0)
        embeddings = hidden @ params.arrays["output_weight"] + params.arrays["output_bias"]
        cache = ForwardCache(
            kind=self.kind,
            version=params.version,
            inputs=features,
            extras={"pre_activation": pre_activation, "hidden": hidden},
        )
        return embeddings, cache

    def backward(self, params: ModelParams, cache: ForwardCache, grad_embeddings: np.ndarray) -> dict[str, np.ndarray]:
        _check_cache(self.kind, params, cache, grad_embeddings, self._embedding_dim)
        hidden = cache.extras["hidden"]
        grad_hidden = grad_embeddings @ params.arrays["output_weight"].T
        grad_pre = np.where(cache.extras["pre_activation"] > 0.0, grad_hidden, 0.0)
        return {
            "hidden_weight": cache.inputs.T @ grad_pre,
            "hidden_bias": grad_pre.sum(axis=0),
            "output_weight": hidden.T @ grad_embeddings,
            "output_bias": grad_embeddings.sum(axis=0),
        }


Backbone = TableModel | LinearModel | MLPModel


def build_model(
    kind: ModelKind,
    *,
    feature_dim: int,
    embedding_dim: int,
    hidden_dim: int = 128,
    num_rows: int = 0,
) -> Backbone:
    if kind == ModelKind.TABLE:
        return TableModel(num_rows=num_rows, embedding_dim=embedding_dim)
    if kind == ModelKind.LINEAR:
        return LinearModel(feature_dim=feature_dim, embedding_dim=embedding_dim)
    return MLPModel(feature_dim=feature_dim, hidden_dim=hidden_dim, embedding_dim=embedding_dim)


@dataclass(frozen=True)
class ModelSpec:
    """Backbone choice and the dimensions that do not come from the data."""

    kind: ModelKind = ModelKind.LINEAR
    embedding_dim: int = 32
    hidden_dim: int = 128

    def __post_init__(self) -> None:
        if self.embedding_dim < 1 or self.hidden_dim < 1:
            raise ConfigError(
                f"model.embedding_dim and model.hidden_dim must be >= 1, got {self.embedding_dim}, {self.hidden_dim}"
            )

    def build(self, feature_dim: int, num_rows: int) -> Backbone:
        return build_model(
            self.kind,
            feature_dim=feature_dim,
            embedding_dim=self.embedding_dim,
            hidden_dim=self.hidden_dim,
            num_rows=num_rows,
        )


def embed_dataset(model: EmbeddingModel, params: ModelParams, dataset: Dataset) -> np.ndarray:
    embeddings, _ = model.forward(params, model.inputs_for(dataset))
    return embeddings


def _uniform_fan_in(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def _check_features(inputs: np.ndarray, feature_dim: int) -> np.ndarray:
    features = np.asarray(inputs, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != feature_dim:
        raise ShapeError(f"expected an n x {feature_dim} feature matrix, got shape {features.shape}")
    return features


def _check_cache(
    kind: ModelKind,
    params: ModelParams,
    cache: ForwardCache,
    grad_embeddings: np.ndarray,
    embedding_dim: int,
) -> None:
    if cache.kind != kind:
        raise StaleCacheError(f"cache was produced by a {cache.kind.value} model, not {kind.value}")
    if cache.version != params.version:
        raise StaleCacheError(
            f"cache was computed at parameter version {cache.version}, parameters are at {params.version}"
        )
    if grad_embeddings.shape != (cache.inputs.shape[0], embedding_dim):
        raise ShapeError(
            f"upstream gradient shape {grad_embeddings.shape} does not match {cache.inputs.shape[0]} x {embedding_dim}"
        )
