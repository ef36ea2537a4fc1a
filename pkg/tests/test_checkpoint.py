from pathlib import Path

import numpy as np
import pytest

from mean_field_dml.datasets import SamplerSpec, SyntheticSpec, class_disjoint_split, generate_synthetic
from mean_field_dml.embedding import ModelSpec
from mean_field_dml.errors import CheckpointError, ConfigError
from mean_field_dml.models import Dataset
from mean_field_dml.runners import TrainConfig, TrainResult, evaluate_checkpoint, load_checkpoint, save_checkpoint, train
from mean_field_dml.runners.checkpoint import CHECKPOINT_MAGIC, decode_checkpoint, encode_checkpoint
from mean_field_dml.schema import ContrastiveParams, DistanceKind, LossKind, MFContParams, MFCWMSParams, ModelKind


def _trained(
    loss: LossKind = LossKind.MFCONT, model: ModelKind = ModelKind.LINEAR, split: bool = True
) -> tuple[TrainResult, Dataset, Dataset]:
    full = generate_synthetic(SyntheticSpec(num_classes=6, per_class=6, feature_dim=5, seed=3))
    train_ds, eval_ds = class_disjoint_split(full) if split else (full, full)
    params = MFCWMSParams() if loss == LossKind.MFCWMS else MFContParams()
    config = TrainConfig(
        loss=loss,
        loss_params=params,
        model=ModelSpec(kind=model, embedding_dim=4, hidden_dim=6),
        sampler=SamplerSpec(classes_per_batch=2, samples_per_class=3),
        max_epochs=2,
    )
    return train(config, train_ds, eval_ds), train_ds, eval_ds


def test_roundtrip_preserves_everything(tmp_path: Path) -> None:
    result, _, eval_ds = _trained()
    path = tmp_path / "best.ckpt"
    save_checkpoint(result.best, path)
    loaded = load_checkpoint(path)

    assert loaded.model == result.best.model
    assert loaded.epoch == result.best.epoch
    assert loaded.optimizer.step == result.best.optimizer.step
    assert loaded.distance == DistanceKind.COSINE
    for name, value in result.best.tensors():
        np.testing.assert_array_equal(dict(loaded.tensors())[name], value)
    assert evaluate_checkpoint(loaded, eval_ds).summary() == evaluate_checkpoint(result.best, eval_ds).summary()
    assert evaluate_checkpoint(loaded, eval_ds).summary() == result.best_report.summary()


def test_encoding_is_deterministic() -> None:
    result, _, _ = _trained(loss=LossKind.MFCWMS)
    payload = encode_checkpoint(result.best)
    assert payload.startswith(CHECKPOINT_MAGIC)
    assert encode_checkpoint(decode_checkpoint(payload)) == payload
    assert result.best.bank is not None


def test_pair_loss_checkpoint_has_no_bank() -> None:
    full = generate_synthetic(SyntheticSpec(num_classes=4, per_class=5, feature_dim=3, seed=1))
    train_ds, eval_ds = class_disjoint_split(full)
    config = TrainConfig(
        loss=LossKind.CONTRASTIVE,
        loss_params=ContrastiveParams(),
        model=ModelSpec(embedding_dim=3),
        sampler=SamplerSpec(classes_per_batch=2, samples_per_class=2),
        max_epochs=1,
    )
    ckpt = decode_checkpoint(encode_checkpoint(train(config, train_ds, eval_ds).best))
    assert ckpt.bank is None
    assert all(not name.startswith("meanfields/") for name, _ in ckpt.tensors())


def test_truncated_and_corrupt_files(tmp_path: Path) -> None:
    result, _, _ = _trained()
    payload = encode_checkpoint(result.best)
    with pytest.raises(CheckpointError, match="truncated"):
        decode_checkpoint(payload[: len(payload) // 2])
    with pytest.raises(CheckpointError, match="offset 0"):
        decode_checkpoint(b"NOTACKPT" + payload[8:])
    with pytest.raises(CheckpointError, match="trailing"):
        decode_checkpoint(payload + b"\x00")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.ckpt")


def test_table_checkpoint_only_evaluates_its_training_set() -> None:
    result, train_ds, _ = _trained(model=ModelKind.TABLE, split=False)
    assert evaluate_checkpoint(result.best, train_ds).p_at_1 >= 0.0
    other = generate_synthetic(SyntheticSpec(num_classes=6, per_class=6, feature_dim=5, seed=4))
    with pytest.raises(ConfigError):
        evaluate_checkpoint(result.best, other)
