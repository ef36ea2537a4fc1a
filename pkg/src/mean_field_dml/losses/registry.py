from __future__ import annotations

from mean_field_dml.errors import ConfigError
from mean_field_dml.losses.mean_field import mfcont_loss, mfcwms_loss
from mean_field_dml.losses.pair import contrastive_loss, cwms_loss
from mean_field_dml.models import Batch, LossResult, MeanFieldBank
from mean_field_dml.schema import (
    LOSS_PARAM_TYPES,
    ContrastiveParams,
    CWMSParams,
    DistanceKind,
    LossKind,
    LossParams,
    MFContParams,
    MFCWMSParams,
)


def compute_loss(
    kind: LossKind,
    batch: Batch,
    params: LossParams,
    distance: DistanceKind,
    bank: MeanFieldBank | None = None,
) -> LossResult:
    """Evaluate any of the four losses; mean-field kinds require a bank."""
    expected = LOSS_PARAM_TYPES[kind]
    if type(params) is not expected:
        raise ConfigError(f"loss {kind.value} expects {expected.__name__}, got {type(params).__name__}")
    if kind.uses_mean_fields and bank is None:
        raise ConfigError(f"loss {kind.value} needs a mean-field bank")

    if kind == LossKind.CONTRASTIVE:
        assert isinstance(params, ContrastiveParams)
        return contrastive_loss(batch, params, distance)
    if kind == LossKind.CWMS:
        assert isinstance(params, CWMSParams)
        return cwms_loss(batch, params, distance)
    assert bank is not None
    if kind == LossKind.MFCONT:
        assert isinstance(params, MFContParams)
        return mfcont_loss(batch, bank, params, distance)
    assert isinstance(params, MFCWMSParams)
    return mfcwms_loss(batch, bank, params, distance)


def default_params(kind: LossKind) -> LossParams:
    return LOSS_PARAM_TYPES[kind]()  # type: ignore[return-value]


class BoundLoss:
    """A loss with its hyperparameters and distance fixed, callable per batch."""

    def __init__(self, kind: LossKind, params: LossParams, distance: DistanceKind) -> None:
        expected = LOSS_PARAM_TYPES[kind]
        if type(params) is not expected:
            raise ConfigError(f"loss {kind.value} expects {expected.__name__}, got {type(params).__name__}")
        self.kind = kind
        self.params = params
        self.distance = distance

    def __call__(self, batch: Batch, bank: MeanFieldBank | None) -> LossResult:
        return compute_loss(self.kind, batch, self.params, self.distance, bank)
