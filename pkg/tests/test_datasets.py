from pathlib import Path

import numpy as np
import pytest

from mean_field_dml.datasets import (
    CLASSIFICATION_BATCH,
    PAIR_BATCH,
    SYNTHETIC_SUITE,
    ClassBalancedSampler,
    DatasetFormat,
    SamplerSpec,
    SyntheticDatasetGenerator,
    SyntheticSpec,
    class_disjoint_split,
    generate_synthetic,
    load_dataset,
    sample_batch,
    save_dataset,
)
from mean_field_dml.errors import ConfigError, DataError, DatasetFormatError
from mean_field_dml.models import Dataset


def test_zero_noise_places_samples_on_centers() -> None:
    spec = SyntheticSpec(num_classes=3, per_class=4, feature_dim=5, noise_sigma=0.0, seed=2)
    generator = SyntheticDatasetGenerator(spec)
    ds = generator.generate()
    np.testing.assert_array_equal(ds.features, generator.centers()[ds.labels])
    assert ds.class_counts() == {0: 4, 1: 4, 2: 4}


def test_synthetic_is_deterministic() -> None:
    first = generate_synthetic(SYNTHETIC_SUITE)
    second = generate_synthetic(SYNTHETIC_SUITE)
    np.testing.assert_array_equal(first.features, second.features)
    np.testing.assert_array_equal(first.labels, second.labels)
    assert first.fingerprint() == second.fingerprint()


def test_synthetic_clusters_are_separable() -> None:
    spec = SyntheticSpec(num_classes=8, per_class=50, feature_dim=64, center_scale=1.0, noise_sigma=0.05, seed=1)
    generator = SyntheticDatasetGenerator(spec)
    ds = generator.generate()
    centers = generator.centers()
    nearest = np.argmin(((ds.features[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2), axis=1)
    assert np.all(nearest == ds.labels)


def test_synthetic_spec_validation() -> None:
    with pytest.raises(ConfigError):
        SyntheticSpec(num_classes=0)
    with pytest.raises(ConfigError):
        SyntheticSpec.from_mapping({"colour": 1})
    assert SyntheticSpec.from_mapping({"num_classes": "4", "noise_sigma": "0.1"}).num_classes == 4


def test_csv_roundtrip(tmp_path: Path) -> None:
    path = tmp_path / "two.csv"
    path.write_text("label,f0,f1\n0,0.5,1.5\n1,-2,3e-1\n", encoding="utf-8")
    ds = load_dataset(path, DatasetFormat.CSV)
    assert ds.size == 2
    np.testing.assert_array_equal(ds.labels, [0, 1])
    np.testing.assert_array_equal(ds.features, [[0.5, 1.5], [-2.0, 0.3]])

    save_dataset(ds, tmp_path / "copy.csv", "csv")
    again = load_dataset(tmp_path / "copy.csv", "csv")
    np.testing.assert_array_equal(again.features, ds.features)


def test_bin_roundtrip_is_bit_identical(tmp_path: Path) -> None:
    features = np.random.default_rng(0).standard_normal((5, 3)).astype(np.float32).astype(np.float64)
    ds = Dataset(features=features, labels=np.array([0, 2, 2, 1, 0]))
    path = tmp_path / "data.bin"
    save_dataset(ds, path, DatasetFormat.BIN)
    loaded = load_dataset(path, DatasetFormat.BIN)
    np.testing.assert_array_equal(loaded.features, features)
    np.testing.assert_array_equal(loaded.labels, ds.labels)
    assert path.stat().st_size == 12 + 4 * 15 + 4 * 5


def test_csv_errors_name_the_line(tmp_path: Path) -> None:
    path = tmp_path / "bad.csv"
    path.write_text("label,f0,f1\n0,1,2\n1,3\n", encoding="utf-8")
    with pytest.raises(DatasetFormatError, match="line 3"):
        load_dataset(path, "csv")

    path.write_text("label,f0\n0,1\nx,2\n", encoding="utf-8")
    with pytest.raises(DatasetFormatError, match="line 3.*not an integer"):
        load_dataset(path, "csv")

    path.write_text("label,f0\n0,abc\n", encoding="utf-8")
    with pytest.raises(DatasetFormatError, match="line 2.*'abc'"):
        load_dataset(path, "csv")


def test_csv_with_invalid_utf8_is_a_format_error(tmp_path: Path) -> None:
    path = tmp_path / "bad.csv"
    path.write_bytes(b"label,f0\n0,\xff\xfe\n")
    with pytest.raises(DatasetFormatError, match="line 2.*UTF-8"):
        load_dataset(path, "csv")


@pytest.mark.parametrize("fmt", ["csv", "bin"])
def test_unreadable_dataset_file(tmp_path: Path, monkeypatch: pytest.MonkeyPatch, fmt: str) -> None:
    path = tmp_path / f"data.{fmt}"
    save_dataset(Dataset(features=np.ones((2, 2)), labels=np.array([0, 1])), path, fmt)

    def denied(self: Path) -> bytes:
        raise PermissionError(13, "Permission denied")

    monkeypatch.setattr(Path, "read_bytes", denied)
    with pytest.raises(DataError, match="Permission denied"):
        load_dataset(path, fmt)


def test_bin_errors_name_the_offset(tmp_path: Path) -> None:
    ds = Dataset(features=np.ones((2, 2)), labels=np.array([0, 1]))
    path = tmp_path / "data.bin"
    save_dataset(ds, path, "bin")
    payload = path.read_bytes()

    path.write_bytes(payload[:-3])
    with pytest.raises(DatasetFormatError, match="truncated"):
        load_dataset(path, "bin")

    path.write_bytes(b"XXXX" + payload[4:])
    with pytest.raises(DatasetFormatError, match="offset 0"):
        load_dataset(path, "bin")

    path.write_bytes(payload + b"\x00")
    with pytest.raises(DatasetFormatError, match="trailing"):
        load_dataset(path, "bin")


def test_missing_dataset_file(tmp_path: Path) -> None:
    with pytest.raises(DataError):
        load_dataset(tmp_path / "absent.csv", "csv")


def test_class_disjoint_split() -> None:
    ds = Dataset(features=np.zeros((4, 1)), labels=np.array([7, 3, 7, 3]))
    train, test = class_disjoint_split(ds)
    np.testing.assert_array_equal(train.labels, [3, 3])
    np.testing.assert_array_equal(test.labels, [7, 7])

    full = generate_synthetic(SyntheticSpec(num_classes=9, per_class=3, feature_dim=2, seed=5))
    train, test = class_disjoint_split(full)
    assert train.num_classes == 5 and test.num_classes == 4
    assert not set(train.class_ids.tolist()) & set(test.class_ids.tolist())
    assert train.size + test.size == full.size


def test_split_needs_two_classes() -> None:
    with pytest.raises(DataError):
        class_disjoint_split(Dataset(features=np.zeros((3, 1)), labels=np.zeros(3, dtype=np.int64)))


def test_batch_profiles() -> None:
    assert CLASSIFICATION_BATCH.batch_size == 32
    assert PAIR_BATCH.batch_size == 32


def test_sampler_draws_p_classes_of_k() -> None:
    labels = np.repeat(np.arange(6), 5)
    sampler = ClassBalancedSampler(labels, SamplerSpec(classes_per_batch=3, samples_per_class=4))
    indices = sampler.sample(np.random.default_rng(0))
    assert indices.size == 12
    classes, counts = np.unique(labels[indices], return_counts=True)
    assert classes.size == 3 and np.all(counts == 4)
    for c in classes:
        assert np.unique(indices[labels[indices] == c]).size == 4


def test_sampler_one_per_class() -> None:
    labels = np.array([0, 0, 1, 2, 2, 2])
    indices = ClassBalancedSampler(labels, SamplerSpec(classes_per_batch=3, samples_per_class=1)).sample(
        np.random.default_rng(1)
    )
    assert sorted(labels[indices].tolist()) == [0, 1, 2]


def test_sampler_small_class_draws_with_replacement() -> None:
    labels = np.array([0, 1, 1, 1])
    indices = ClassBalancedSampler(labels, SamplerSpec(classes_per_batch=2, samples_per_class=3)).sample(
        np.random.default_rng(2)
    )
    assert np.sum(labels[indices] == 0) == 3


def test_sampler_is_seeded_and_validated() -> None:
    ds = generate_synthetic(SyntheticSpec(num_classes=5, per_class=6, feature_dim=2))
    spec = SamplerSpec(classes_per_batch=2, samples_per_class=3)
    first = sample_batch(ds, spec, np.random.default_rng(9))
    second = sample_batch(ds, spec, np.random.default_rng(9))
    np.testing.assert_array_equal(first, second)

    with pytest.raises(ConfigError, match="sampler.classes_per_batch"):
        ClassBalancedSampler(ds.labels, SamplerSpec(classes_per_batch=6, samples_per_class=1))
    with pytest.raises(ConfigError):
        SamplerSpec(classes_per_batch=0)
