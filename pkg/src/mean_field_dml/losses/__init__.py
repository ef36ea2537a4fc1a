from mean_field_dml.losses.mean_field import mfcont_loss, mfcwms_loss
from mean_field_dml.losses.pair import contrastive_loss, cwms_loss
from mean_field_dml.losses.registry import BoundLoss, compute_loss, default_params

__all__ = [
    "contrastive_loss",
    "cwms_loss",
    "mfcont_loss",
    "mfcwms_loss",
    "BoundLoss",
    "compute_loss",
    "default_params",
]
