from collections.abc import Iterator
from contextlib import contextmanager

import numpy as np
import pytest

import mean_field_dml.bench as bench
from mean_field_dml.bench import BENCH_HEADER, bench_inputs, bench_loss_scaling, fit_loglog_slope, slopes_by_loss
from mean_field_dml.errors import ConfigError
from mean_field_dml.models import BenchRow
from mean_field_dml.schema import LossKind


def _rows(loss: str, times: dict[int, float]) -> list[BenchRow]:
    return [
        BenchRow(loss=loss, batch_size=b, num_classes=4, dim=8, mean_ns=t, std_ns=0.0, repeats=5)
        for b, t in times.items()
    ]


def test_slope_of_exact_power_laws() -> None:
    sizes = [64, 128, 256, 512]
    assert fit_loglog_slope(_rows("contrastive", {b: float(b * b) for b in sizes})) == pytest.approx(2.0, abs=1e-9)
    assert fit_loglog_slope(_rows("mfcont", {b: 3.0 * b for b in sizes})) == pytest.approx(1.0, abs=1e-9)


def test_slopes_by_loss_groups_rows() -> None:
    sizes = [10, 20, 40]
    rows = _rows("cwms", {b: float(b**2) for b in sizes}) + _rows("mfcwms", {b: float(b) for b in sizes})
    slopes = slopes_by_loss(rows)
    assert slopes == pytest.approx({"cwms": 2.0, "mfcwms": 1.0}, abs=1e-9)


def test_slope_fit_errors() -> None:
    with pytest.raises(ConfigError):
        fit_loglog_slope(_rows("cwms", {64: 1.0, 128: 2.0}))
    with pytest.raises(ConfigError):
        fit_loglog_slope(_rows("cwms", {64: 1.0, 128: 2.0}) + _rows("mfcwms", {256: 4.0}))


def test_bench_inputs_are_seeded() -> None:
    first, bank = bench_inputs(12, 4, 3, seed=1)
    second, _ = bench_inputs(12, 4, 3, seed=1)
    np.testing.assert_array_equal(first.embeddings, second.embeddings)
    np.testing.assert_array_equal(first.labels, np.arange(12) % 4)
    assert bank.vectors.shape == (4, 3)


def test_bench_rows_and_validation() -> None:
    rows = bench_loss_scaling([LossKind.MFCONT, LossKind.CONTRASTIVE], [8, 16, 32], num_classes=4, dim=3, repeats=5, seed=0)
    assert [(row.loss, row.batch_size) for row in rows] == [
        ("mfcont", 8),
        ("mfcont", 16),
        ("mfcont", 32),
        ("contrastive", 8),
        ("contrastive", 16),
        ("contrastive", 32),
    ]
    assert all(row.mean_ns > 0 and row.repeats == 5 for row in rows)
    assert len(rows[0].as_csv_row()) == len(BENCH_HEADER)

    with pytest.raises(ConfigError):
        bench_loss_scaling([LossKind.CWMS], [8, 16, 32], num_classes=4, dim=3, repeats=2, seed=0)
    with pytest.raises(ConfigError):
        bench_loss_scaling([LossKind.CWMS], [16, 8, 32], num_classes=4, dim=3, repeats=5, seed=0)


@pytest.mark.slow
def test_pair_losses_scale_faster_than_mean_field_losses() -> None:
    rows = bench_loss_scaling(list(LossKind), [64, 128, 256, 512, 1024], num_classes=16, dim=64, repeats=7, seed=0)
    slopes = slopes_by_loss(rows)
    assert slopes["contrastive"] >= 1.7
    assert slopes["cwms"] >= 1.7
    assert slopes["mfcont"] <= 1.3
    assert slopes["mfcwms"] <= 1.3
    assert slopes["contrastive"] > slopes["mfcont"]
    assert slopes["cwms"] > slopes["mfcwms"]


def test_timed_calls_run_under_a_single_blas_thread(monkeypatch: pytest.MonkeyPatch) -> None:
    requested: list[int] = []
    depth: list[int] = []
    inner_compute = bench.compute_loss

    @contextmanager
    def recording_limits(limits: int) -> Iterator[None]:
        requested.append(limits)
        depth.append(limits)
        try:
            yield
        finally:
            depth.pop()

    def checked_compute(*args: object) -> object:
        assert depth == [1]
        return inner_compute(*args)

    monkeypatch.setattr(bench, "threadpool_limits", recording_limits)
    monkeypatch.setattr(bench, "compute_loss", checked_compute)
    rows = bench_loss_scaling([LossKind.MFCWMS], [4, 8, 16], num_classes=2, dim=3, repeats=5, seed=0)
    assert len(rows) == 3
    assert requested == [bench.BLAS_THREADS] == [1]
    assert not depth
