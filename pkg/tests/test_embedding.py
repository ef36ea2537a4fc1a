import numpy as np
import pytest

from mean_field_dml.embedding import LinearModel, MLPModel, ModelParams, ModelSpec, TableModel, embed_dataset
from mean_field_dml.errors import ConfigError, ShapeError, StaleCacheError
from mean_field_dml.models import Dataset
from mean_field_dml.schema import ModelKind


def test_linear_identity_returns_features() -> None:
    model = LinearModel(feature_dim=3, embedding_dim=3)
    params = ModelParams(arrays={"weight": np.eye(3), "bias": np.zeros(3)})
    features = np.random.default_rng(0).standard_normal((4, 3))
    embeddings, _ = model.forward(params, features)
    np.testing.assert_array_equal(embeddings, features)


def test_table_looks_up_rows() -> None:
    model = TableModel(num_rows=3, embedding_dim=2)
    params = model.init_params(np.random.default_rng(1))
    embeddings, _ = model.forward(params, np.array([2, 0]))
    np.testing.assert_array_equal(embeddings, params.arrays["table"][[2, 0]])
    np.testing.assert_allclose(np.linalg.norm(params.arrays["table"], axis=1), 1.0)


def test_table_rejects_out_of_range_rows() -> None:
    model = TableModel(num_rows=3, embedding_dim=2)
    params = model.init_params(np.random.default_rng(1))
    with pytest.raises(ShapeError):
        model.forward(params, np.array([3]))


def test_mlp_with_dead_hidden_layer_returns_output_bias() -> None:
    model = MLPModel(feature_dim=2, hidden_dim=3, embedding_dim=2)
    params = ModelParams(
        arrays={
            "hidden_weight": np.zeros((2, 3)),
            "hidden_bias": -np.ones(3),
            "output_weight": np.ones((3, 2)),
            "output_bias": np.array([0.5, -0.5]),
        }
    )
    embeddings, _ = model.forward(params, np.ones((4, 2)))
    np.testing.assert_array_equal(embeddings, np.tile([0.5, -0.5], (4, 1)))


def test_zero_upstream_gives_zero_gradients() -> None:
    model = MLPModel(feature_dim=3, hidden_dim=4, embedding_dim=2)
    params = model.init_params(np.random.default_rng(2))
    _, cache = model.forward(params, np.ones((5, 3)))
    grads = model.backward(params, cache, np.zeros((5, 2)))
    assert all(not np.any(grad) for grad in grads.values())
    assert set(grads) == set(params.arrays)


def test_stale_cache_is_rejected() -> None:
    model = LinearModel(feature_dim=2, embedding_dim=2)
    params = model.init_params(np.random.default_rng(3))
    _, cache = model.forward(params, np.ones((1, 2)))
    updated = params.replace({name: value + 1.0 for name, value in params.arrays.items()})
    with pytest.raises(StaleCacheError):
        model.backward(updated, cache, np.ones((1, 2)))


def test_backward_rejects_upstream_shape() -> None:
    model = LinearModel(feature_dim=2, embedding_dim=2)
    params = model.init_params(np.random.default_rng(3))
    _, cache = model.forward(params, np.ones((3, 2)))
    with pytest.raises(ShapeError):
        model.backward(params, cache, np.ones((2, 2)))


def test_forward_rejects_feature_width() -> None:
    model = LinearModel(feature_dim=4, embedding_dim=2)
    with pytest.raises(ShapeError):
        model.forward(model.init_params(np.random.default_rng(0)), np.ones((2, 3)))


def test_init_params_are_seeded() -> None:
    model = MLPModel(feature_dim=3, hidden_dim=5, embedding_dim=2)
    first = model.init_params(np.random.default_rng(4))
    second = model.init_params(np.random.default_rng(4))
    for name in first.arrays:
        np.testing.assert_array_equal(first.arrays[name], second.arrays[name])


def test_model_spec_builds_each_kind() -> None:
    ds = Dataset(features=np.ones((6, 3)), labels=np.arange(6) % 2)
    for kind in ModelKind:
        spec = ModelSpec(kind=kind, embedding_dim=4, hidden_dim=5)
        model = spec.build(feature_dim=ds.feature_dim, num_rows=ds.size)
        assert model.kind == kind
        params = model.init_params(np.random.default_rng(0))
        assert embed_dataset(model, params, ds).shape == (6, 4)


def test_model_spec_validation() -> None:
    with pytest.raises(ConfigError):
        ModelSpec(embedding_dim=0)
    with pytest.raises(ConfigError):
        LinearModel(feature_dim=0, embedding_dim=2)
