from __future__ import annotations

import logging
import math
import time
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from mean_field_dml.datasets.sampler import ClassBalancedSampler, SamplerSpec
from mean_field_dml.embedding import ModelParams, ModelSpec, embed_dataset
from mean_field_dml.errors import ConfigError, DataError, NumericalError
from mean_field_dml.interfaces import BatchSampler, EmbeddingModel, LossFunction
from mean_field_dml.losses import BoundLoss
from mean_field_dml.meanfield import check_bank_norms, init_bank
from mean_field_dml.models import Batch, Dataset, LogRecord, MeanFieldBank, RetrievalReport
from mean_field_dml.optim import GroupId, Optimizer, OptimizerSpec
from mean_field_dml.retrieval import concatenate_embeddings, evaluate
from mean_field_dml.runners.checkpoint import Checkpoint, snapshot_checkpoint
from mean_field_dml.schema import LOSS_PARAM_TYPES, DistanceKind, InitScheme, LossKind, LossParams, MFContParams, ModelKind

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    loss: LossKind = LossKind.MFCONT
    loss_params: LossParams = field(default_factory=MFContParams)
    distance: DistanceKind = DistanceKind.COSINE
    model: ModelSpec = field(default_factory=ModelSpec)
    optimizer: OptimizerSpec = field(default_factory=OptimizerSpec)
    sampler: SamplerSpec = field(default_factory=SamplerSpec)
    max_epochs: int = 200
    patience: int = 5
    eval_every: int = 1
    seed: int = 0
    deterministic: bool = True
    track_train_metrics: bool = False
    init_scheme: InitScheme = InitScheme.UNIT_RANDOM

    def __post_init__(self) -> None:
        expected = LOSS_PARAM_TYPES[self.loss]
        if type(self.loss_params) is not expected:
            raise ConfigError(
                f"loss: {self.loss.value} expects {expected.__name__}, got {type(self.loss_params).__name__}"
            )
        for name in ("max_epochs", "patience", "eval_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"training.{name} must be >= 1, got {getattr(self, name)}")


@dataclass(slots=True)
class TrainResult:
    history: list[LogRecord]
    best: Checkpoint
    best_epoch: int
    best_report: RetrievalReport
    stopped_early: bool = False


def train(config: TrainConfig, train_ds: Dataset, eval_ds: Dataset) -> TrainResult:
    """Joint minimisation over the model and (for mean-field losses) the mean fields.

    Each epoch runs ceil(n / (P * K)) steps. Evaluation on `eval_ds` happens every
    `eval_every` epochs and after the last epoch; training stops once MAP@R has
    not improved for `patience` consecutive evaluations. The returned checkpoint
    is the one with the highest evaluated MAP@R.

    `best_report` is recomputed from that checkpoint after its tensors are rounded
    to float32, so it matches what `eval` prints for the saved file and can differ
    in the last digits from the live value logged at `best_epoch`. The live value is
    kept in `best.best_map_at_r`.
    """
    _check_eval_dataset(eval_ds)
    fingerprint = train_ds.fingerprint()
    if config.model.kind == ModelKind.TABLE and eval_ds.fingerprint() != fingerprint:
        raise ConfigError("model.kind: a table model can only be evaluated on its own training set")

    dense_train = train_ds.remapped()
    seeds = np.random.SeedSequence(config.seed).spawn(2)
    model_rng = np.random.default_rng(seeds[0])
    sampler_rng = np.random.default_rng(seeds[1])

    model = config.model.build(feature_dim=train_ds.feature_dim, num_rows=train_ds.size)
    params = model.init_params(model_rng)
    bank = (
        init_bank(dense_train.num_classes, config.model.embedding_dim, config.init_scheme, config.seed)
        if config.loss.uses_mean_fields
        else None
    )
    loss_fn: LossFunction = BoundLoss(config.loss, config.loss_params, config.distance)
    sampler: BatchSampler = ClassBalancedSampler(dense_train.labels, config.sampler)
    optimizer = Optimizer(config.optimizer, _grouped(params, bank))
    steps_per_epoch = math.ceil(train_ds.size / config.sampler.batch_size)

    history: list[LogRecord] = []
    best: Checkpoint | None = None
    best_epoch = 0
    best_map = -math.inf
    stale_evals = 0
    stopped_early = False
    global_step = 0
    started = time.perf_counter()

    for epoch in range(1, config.max_epochs + 1):
        for _ in range(steps_per_epoch):
            global_step += 1
            indices = sampler.sample(sampler_rng)
            embeddings, cache = model.forward(params, model.inputs_for(dense_train, indices))
            _require_finite(embeddings, "embeddings", epoch, global_step)
            batch = Batch(embeddings=embeddings, labels=dense_train.labels[indices])
            result = loss_fn(batch, bank)
            if not math.isfinite(result.value):
                logger.warning("non-finite loss %r at epoch %d step %d", result.value, epoch, global_step)
                raise NumericalError(f"non-finite loss {result.value!r} at epoch {epoch}, step {global_step}")

            grads: dict[str, dict[str, np.ndarray]] = {
                GroupId.MODEL.value: model.backward(params, cache, result.grad_embeddings)
            }
            if bank is not None and result.grad_meanfields is not None:
                grads[GroupId.MEANFIELDS.value] = {"vectors": result.grad_meanfields}
            updated = optimizer.step(_grouped(params, bank), grads)
            params = params.replace(updated[GroupId.MODEL.value])
            for name, value in params.arrays.items():
                _require_finite(value, f"parameter {name}", epoch, global_step)
            if bank is not None:
                vectors = updated[GroupId.MEANFIELDS.value]["vectors"]
                _require_finite(vectors, "mean fields", epoch, global_step)
                bank = MeanFieldBank(vectors=vectors)

            wall_time = 0.0 if config.deterministic else time.perf_counter() - started
            history.append(LogRecord(epoch=epoch, step=global_step, loss=result.value, wall_time=wall_time))

        if epoch % config.eval_every != 0 and epoch != config.max_epochs:
            continue

        if bank is not None:
            check_bank_norms(bank)
        report = _evaluate_live(model, params, eval_ds, config.distance, epoch, global_step)
        metrics = dict(report.summary())
        if config.track_train_metrics:
            metrics["train_map_at_r"] = _evaluate_live(model, params, train_ds, config.distance, epoch, global_step).map_at_r
        history[-1].metrics.update(metrics)
        logger.info("epoch %d step %d map_at_r=%.4f p_at_1=%.4f", epoch, global_step, report.map_at_r, report.p_at_1)

        if report.map_at_r > best_map:
            best_map = report.map_at_r
            best_epoch = epoch
            stale_evals = 0
            best = snapshot_checkpoint(
                model=config.model,
                feature_dim=train_ds.feature_dim,
                num_rows=train_ds.size,
                params=params,
                bank=bank,
                optimizer=optimizer.state,
                epoch=epoch,
                best_map_at_r=best_map,
                distance=config.distance,
                dataset_fingerprint=fingerprint,
            )
        else:
            stale_evals += 1
            if stale_evals >= config.patience:
                logger.warning(
                    "early stopping at epoch %d: map_at_r has not improved on %.4f (epoch %d) for %d evaluations",
                    epoch,
                    best_map,
                    best_epoch,
                    stale_evals,
                )
                stopped_early = True
                break

    assert best is not None
    return TrainResult(
        history=history,
        best=best,
        best_epoch=best_epoch,
        best_report=evaluate_checkpoint(best, eval_ds),
        stopped_early=stopped_early,
    )


def evaluate_checkpoint(ckpt: Checkpoint, ds: Dataset, kind: DistanceKind | None = None) -> RetrievalReport:
    _check_eval_dataset(ds)
    embeddings = _checkpoint_embeddings(ckpt, ds)
    return evaluate(embeddings, ds.labels, kind or ckpt.distance)


def evaluate_checkpoints(ckpts: Sequence[Checkpoint], ds: Dataset, kind: DistanceKind | None = None) -> RetrievalReport:
    """Evaluate the column-wise concatenation of several models' embeddings."""
    if not ckpts:
        raise ConfigError("at least one checkpoint is required")
    _check_eval_dataset(ds)
    kind = kind or ckpts[0].distance
    blocks = [_checkpoint_embeddings(ckpt, ds) for ckpt in ckpts]
    return evaluate(concatenate_embeddings(blocks, kind), ds.labels, kind)


def best_epoch(history: Sequence[LogRecord], key: str = "map_at_r") -> int:
    """Epoch of the first evaluation reaching the highest `key` value."""
    evaluated = [record for record in history if key in record.metrics]
    if not evaluated:
        raise ConfigError(f"history has no evaluations with metric {key!r}")
    return max(evaluated, key=lambda record: (record.metrics[key], -record.step)).epoch


def steps_to_fraction(history: Sequence[LogRecord], fraction: float, key: str = "train_map_at_r") -> int:
    """First step whose `key` reaches `fraction` of its value at the last evaluation."""
    evaluated = [record for record in history if key in record.metrics]
    if not evaluated:
        raise ConfigError(f"history has no evaluations with metric {key!r}")
    target = fraction * evaluated[-1].metrics[key]
    return next(record.step for record in evaluated if record.metrics[key] >= target)


def _checkpoint_embeddings(ckpt: Checkpoint, ds: Dataset) -> np.ndarray:
    if ckpt.model.kind == ModelKind.TABLE:
        if ckpt.dataset_fingerprint and ds.fingerprint() != ckpt.dataset_fingerprint:
            raise ConfigError("model.kind: a table model can only be evaluated on its own training set")
    return embed_dataset(ckpt.build_model(), ckpt.params, ds)


def _evaluate_live(
    model: EmbeddingModel,
    params: ModelParams,
    ds: Dataset,
    distance: DistanceKind,
    epoch: int,
    step: int,
) -> RetrievalReport:
    embeddings = embed_dataset(model, params, ds)
    _require_finite(embeddings, "evaluation embeddings", epoch, step)
    return evaluate(embeddings, ds.labels, distance)


def _grouped(params: ModelParams, bank: MeanFieldBank | None) -> dict[str, dict[str, np.ndarray]]:
    grouped = {GroupId.MODEL.value: params.arrays}
    if bank is not None:
        grouped[GroupId.MEANFIELDS.value] = {"vectors": bank.vectors}
    return grouped


def _check_eval_dataset(ds: Dataset) -> None:
    singletons = [label for label, count in ds.class_counts().items() if count < 2]
    if singletons:
        raise DataError(f"dataset {ds.name!r}: classes {singletons} have fewer than 2 samples")


def _require_finite(values: np.ndarray, what: str, epoch: int, step: int) -> None:
    if not np.all(np.isfinite(values)):
        logger.warning("non-finite %s at epoch %d step %d", what, epoch, step)
        raise NumericalError(f"non-finite {what} at epoch {epoch}, step {step}")
