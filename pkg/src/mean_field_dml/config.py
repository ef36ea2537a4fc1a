"""Run configuration documents.

A run config is a JSON object with the sections `loss`, `distance`, `model`,
`optimizer`, `sampler`, `training`, `data` and `output_dir`. Every section is
optional and falls back to the defaults of `default_train_config()`. Unknown
keys are rejected with their dotted path.
"""

from __future__ import annotations

import copy
import json
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from mean_field_dml.datasets.io import DatasetFormat, load_dataset
from mean_field_dml.datasets.profiles import PAIR_BATCH, SYNTHETIC_SUITE
from mean_field_dml.datasets.sampler import SamplerSpec
from mean_field_dml.datasets.splits import SplitRule, class_disjoint_split
from mean_field_dml.datasets.synthetic import SyntheticSpec, generate_synthetic
from mean_field_dml.embedding import ModelSpec
from mean_field_dml.errors import ConfigError
from mean_field_dml.models import Dataset
from mean_field_dml.optim import OptimizerSpec
from mean_field_dml.runners.training import TrainConfig
from mean_field_dml.schema import (
    LOSS_PARAM_TYPES,
    DistanceKind,
    InitScheme,
    LossKind,
    ModelKind,
    OptimizerKind,
    parse_enum,
)

SYNTHETIC_PREFIX = "synthetic:"
NO_SPLIT = "none"

_SECTIONS = {"loss", "distance", "model", "optimizer", "sampler", "training", "data", "output_dir"}
_MODEL_KEYS = {"kind", "embedding_dim", "hidden_dim"}
_OPTIMIZER_KEYS = {"kind", "model_lr", "meanfield_lr", "weight_decay", "momentum", "rms_decay"}
_SAMPLER_KEYS = {"classes_per_batch", "samples_per_class"}
_TRAINING_KEYS = {"max_epochs", "patience", "eval_every", "seed", "deterministic", "track_train_metrics", "init_scheme"}
_DATA_KEYS = {"synthetic", "path", "format", "eval_path", "split"}


def default_train_config() -> TrainConfig:
    """Linear d=32 backbone, Cosine distance, AdamW at 1e-4 / 2e-1, 8 x 4 batches, MFCont defaults."""
    return TrainConfig(
        loss=LossKind.MFCONT,
        loss_params=LOSS_PARAM_TYPES[LossKind.MFCONT](),  # type: ignore[arg-type]
        distance=DistanceKind.COSINE,
        model=ModelSpec(kind=ModelKind.LINEAR, embedding_dim=32),
        optimizer=OptimizerSpec(kind=OptimizerKind.ADAMW, model_lr=1e-4, meanfield_lr=2e-1),
        sampler=PAIR_BATCH,
        max_epochs=200,
        patience=5,
        eval_every=1,
    )


@dataclass(frozen=True)
class DataSource:
    """Where the train and eval datasets come from.

    A synthetic spec or a file path; without `eval_path` the data is split into
    class-disjoint halves, unless `split` is "none" (evaluate on the training set).
    """

    synthetic: SyntheticSpec | None = None
    path: Path | None = None
    format: DatasetFormat = DatasetFormat.CSV
    eval_path: Path | None = None
    split: str = SplitRule.FIRST_HALF_CLASSES.value

    def load(self) -> tuple[Dataset, Dataset]:
        if self.path is not None:
            full = load_dataset(self.path, self.format)
        else:
            full = generate_synthetic(self.synthetic or SYNTHETIC_SUITE)
        if self.eval_path is not None:
            return full, load_dataset(self.eval_path, self.format)
        if self.split == NO_SPLIT:
            return full, full
        return class_disjoint_split(full, SplitRule(self.split))


@dataclass(frozen=True)
class RunConfig:
    train: TrainConfig
    data: DataSource
    output_dir: Path
    document: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def load(cls, path: Path) -> RunConfig:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        try:
            document = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        return cls.from_mapping(document)

    @classmethod
    def from_mapping(cls, document: Mapping[str, Any]) -> RunConfig:
        if not isinstance(document, Mapping):
            raise ConfigError("config document must be a JSON object")
        _reject_unknown(document, _SECTIONS, "")
        base = default_train_config()

        loss_section = dict(_section(document, "loss"))
        loss_kind = parse_enum(LossKind, loss_section.pop("kind", base.loss.value), "loss.kind")
        loss_params = LOSS_PARAM_TYPES[loss_kind].from_mapping(loss_section, prefix="loss")

        model = _section(document, "model")
        _reject_unknown(model, _MODEL_KEYS, "model")
        optimizer = _section(document, "optimizer")
        _reject_unknown(optimizer, _OPTIMIZER_KEYS, "optimizer")
        sampler = _section(document, "sampler")
        _reject_unknown(sampler, _SAMPLER_KEYS, "sampler")
        training = _section(document, "training")
        _reject_unknown(training, _TRAINING_KEYS, "training")

        train = TrainConfig(
            loss=loss_kind,
            loss_params=loss_params,  # type: ignore[arg-type]
            distance=parse_enum(DistanceKind, document.get("distance", base.distance.value), "distance"),
            model=ModelSpec(
                kind=parse_enum(ModelKind, model.get("kind", base.model.kind.value), "model.kind"),
                embedding_dim=_int(model, "embedding_dim", base.model.embedding_dim, "model"),
                hidden_dim=_int(model, "hidden_dim", base.model.hidden_dim, "model"),
            ),
            optimizer=OptimizerSpec(
                kind=parse_enum(OptimizerKind, optimizer.get("kind", base.optimizer.kind.value), "optimizer.kind"),
                model_lr=_float(optimizer, "model_lr", base.optimizer.model_lr, "optimizer"),
                meanfield_lr=_float(optimizer, "meanfield_lr", base.optimizer.meanfield_lr, "optimizer"),
                weight_decay=_float(optimizer, "weight_decay", base.optimizer.weight_decay, "optimizer"),
                momentum=_float(optimizer, "momentum", base.optimizer.momentum, "optimizer"),
                rms_decay=_float(optimizer, "rms_decay", base.optimizer.rms_decay, "optimizer"),
            ),
            sampler=SamplerSpec(
                classes_per_batch=_int(sampler, "classes_per_batch", base.sampler.classes_per_batch, "sampler"),
                samples_per_class=_int(sampler, "samples_per_class", base.sampler.samples_per_class, "sampler"),
            ),
            max_epochs=_int(training, "max_epochs", base.max_epochs, "training"),
            patience=_int(training, "patience", base.patience, "training"),
            eval_every=_int(training, "eval_every", base.eval_every, "training"),
            seed=_int(training, "seed", base.seed, "training"),
            deterministic=_bool(training, "deterministic", base.deterministic, "training"),
            track_train_metrics=_bool(training, "track_train_metrics", base.track_train_metrics, "training"),
            init_scheme=parse_enum(
                InitScheme, training.get("init_scheme", base.init_scheme.value), "training.init_scheme"
            ),
        )
        output_dir = document.get("output_dir", "runs/latest")
        if not isinstance(output_dir, str) or not output_dir:
            raise ConfigError(f"output_dir: expected a path string, got {output_dir!r}")
        return cls(
            train=train,
            data=_parse_data(_section(document, "data")),
            output_dir=Path(output_dir),
            document=copy.deepcopy(dict(document)),
        )

    def with_overrides(self, overrides: Mapping[str, Any]) -> RunConfig:
        """Re-parse the document with dotted keys replaced, e.g. {"loss.beta": 60, "training.seed": 3}.

        Switching `loss.kind` drops the previous loss's hyperparameters unless
        they are overridden too.
        """
        document = copy.deepcopy(dict(self.document))
        if "loss.kind" in overrides:
            current = dict(document.get("loss", {})).get("kind", default_train_config().loss.value)
            if str(overrides["loss.kind"]).lower() != str(current).lower():
                document["loss"] = {}
        for dotted, value in overrides.items():
            _set_dotted(document, dotted, value)
        return RunConfig.from_mapping(document)


def parse_data_argument(value: str, format: str | None = None) -> DataSource:
    """`synthetic:` or `synthetic:key=value,...` for a generated dataset, anything else is a file path."""
    if value.startswith(SYNTHETIC_PREFIX):
        body = value[len(SYNTHETIC_PREFIX) :].strip()
        mapping: dict[str, str] = {}
        for item in filter(None, (part.strip() for part in body.split(","))):
            key, sep, raw = item.partition("=")
            if not sep:
                raise ConfigError(f"data: expected key=value in synthetic spec, got {item!r}")
            mapping[key.strip()] = raw.strip()
        return DataSource(synthetic=SyntheticSpec.from_mapping(mapping, prefix="data.synthetic"), split=NO_SPLIT)
    path = Path(value)
    return DataSource(path=path, format=_format_for(path, format), split=NO_SPLIT)


def _parse_data(section: Mapping[str, Any]) -> DataSource:
    _reject_unknown(section, _DATA_KEYS, "data")
    if "synthetic" in section and "path" in section:
        raise ConfigError("data: give either synthetic or path, not both")
    split = str(section.get("split", SplitRule.FIRST_HALF_CLASSES.value)).lower()
    if split != NO_SPLIT:
        parse_enum(SplitRule, split, "data.split")
    eval_path = Path(section["eval_path"]) if "eval_path" in section else None
    if "path" in section:
        path = Path(section["path"])
        return DataSource(
            path=path,
            format=_format_for(path, section.get("format")),
            eval_path=eval_path,
            split=split,
        )
    synthetic = section.get("synthetic", {})
    if not isinstance(synthetic, Mapping):
        raise ConfigError("data.synthetic: expected an object")
    spec = SyntheticSpec.from_mapping(synthetic, prefix="data.synthetic") if synthetic else SYNTHETIC_SUITE
    return DataSource(synthetic=spec, eval_path=eval_path, split=split)


def _format_for(path: Path, explicit: object | None) -> DatasetFormat:
    if explicit is None:
        explicit = "bin" if path.suffix.lower() == ".bin" else "csv"
    return parse_enum(DatasetFormat, explicit, "data.format")


def _section(document: Mapping[str, Any], name: str) -> Mapping[str, Any]:
    section = document.get(name, {})
    if not isinstance(section, Mapping):
        raise ConfigError(f"{name}: expected an object, got {type(section).__name__}")
    return section


def _reject_unknown(mapping: Mapping[str, Any], allowed: set[str], prefix: str) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        path = f"{prefix}.{unknown[0]}" if prefix else unknown[0]
        raise ConfigError(f"{path}: unknown key")


def _int(section: Mapping[str, Any], key: str, default: int, prefix: str) -> int:
    value = section.get(key, default)
    if isinstance(value, bool):
        raise ConfigError(f"{prefix}.{key}: expected an integer, got {value!r}")
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{prefix}.{key}: expected an integer, got {value!r}") from None
    if not math.isfinite(number) or number != int(number):
        raise ConfigError(f"{prefix}.{key}: expected an integer, got {value!r}")
    return int(number)


def _float(section: Mapping[str, Any], key: str, default: float, prefix: str) -> float:
    value = section.get(key, default)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{prefix}.{key}: expected a number, got {value!r}") from None


def _bool(section: Mapping[str, Any], key: str, default: bool, prefix: str) -> bool:
    value = section.get(key, default)
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("true", "false"):
        return value.lower() == "true"
    raise ConfigError(f"{prefix}.{key}: expected true or false, got {value!r}")


def _set_dotted(document: dict[str, Any], dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    if not all(parts):
        raise ConfigError(f"{dotted}: malformed config key")
    node = document
    for part in parts[:-1]:
        child = node.get(part)
        if child is None:
            child = {}
        elif not isinstance(child, Mapping):
            raise ConfigError(f"{dotted}: {part} is not a section")
        node[part] = dict(child)
        node = node[part]
    node[parts[-1]] = value
