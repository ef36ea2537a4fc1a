from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import StrEnum
from typing import Any, Mapping, TypeVar

from mean_field_dml.errors import ConfigError


class DistanceKind(StrEnum):
    COSINE = "cosine"
    SQ_EUCLIDEAN = "sqeuclidean"


class LossKind(StrEnum):
    CONTRASTIVE = "contrastive"
    CWMS = "cwms"
    MFCONT = "mfcont"
    MFCWMS = "mfcwms"

    @property
    def uses_mean_fields(self) -> bool:
        return self in (LossKind.MFCONT, LossKind.MFCWMS)


class ModelKind(StrEnum):
    TABLE = "table"
    LINEAR = "linear"
    MLP1 = "mlp1"


class InitScheme(StrEnum):
    UNIT_RANDOM = "unit_random"
    GAUSSIAN = "gaussian"


class OptimizerKind(StrEnum):
    SGD = "sgd"
    RMSPROP = "rmsprop"
    ADAMW = "adamw"


_E = TypeVar("_E", bound=StrEnum)
_P = TypeVar("_P", bound="_LossParams")


def parse_enum(enum_type: type[_E], value: object, field_name: str) -> _E:
    try:
        return enum_type(str(value).lower())
    except ValueError:
        choices = ", ".join(member.value for member in enum_type)
        raise ConfigError(f"{field_name}: unknown value {value!r} (expected one of: {choices})") from None


@dataclass(frozen=True)
class _LossParams:
    @classmethod
    def from_mapping(cls: type[_P], mapping: Mapping[str, Any], prefix: str = "loss") -> _P:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ConfigError(f"{prefix}.{unknown[0]}: unknown key for {cls.__name__}")
        values: dict[str, float] = {}
        for key, value in mapping.items():
            try:
                values[key] = float(value)
            except (TypeError, ValueError):
                raise ConfigError(f"{prefix}.{key}: expected a number, got {value!r}") from None
        return cls(**values)

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def _require_finite(self) -> None:
        for name, value in self.as_dict().items():
            if not math.isfinite(value):
                raise ConfigError(f"{name} must be finite, got {value}")


@dataclass(frozen=True)
class ContrastiveParams(_LossParams):
    """Margins of the pair-based contrastive loss."""

    m_p: float = 0.02
    m_n: float = 0.3

    def __post_init__(self) -> None:
        self._require_finite()
        if self.m_p < 0:
            raise ConfigError(f"m_p must be >= 0, got {self.m_p}")
        if self.m_n <= 0:
            raise ConfigError(f"m_n must be > 0, got {self.m_n}")
        if self.m_p >= self.m_n:
            raise ConfigError(f"m_p must be smaller than m_n, got m_p={self.m_p}, m_n={self.m_n}")


@dataclass(frozen=True)
class CWMSParams(_LossParams):
    """Positive scale alpha, negative scale beta and similarity margin delta."""

    alpha: float = 0.01
    beta: float = 80.0
    delta: float = 0.8

    def __post_init__(self) -> None:
        self._require_finite()
        if self.alpha <= 0 or self.beta <= 0:
            raise ConfigError(f"alpha and beta must be > 0, got alpha={self.alpha}, beta={self.beta}")


@dataclass(frozen=True)
class MFContParams(ContrastiveParams):
    lambda_mf: float = 0.0

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.lambda_mf < 0:
            raise ConfigError(f"lambda_mf must be >= 0, got {self.lambda_mf}")


@dataclass(frozen=True)
class MFCWMSParams(CWMSParams):
    lambda_mf: float = 0.0

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.lambda_mf < 0:
            raise ConfigError(f"lambda_mf must be >= 0, got {self.lambda_mf}")


LossParams = ContrastiveParams | CWMSParams | MFContParams | MFCWMSParams

LOSS_PARAM_TYPES: Mapping[LossKind, type[_LossParams]] = {
    LossKind.CONTRASTIVE: ContrastiveParams,
    LossKind.CWMS: CWMSParams,
    LossKind.MFCONT: MFContParams,
    LossKind.MFCWMS: MFCWMSParams,
}
