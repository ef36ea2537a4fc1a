from mean_field_dml.runners.checkpoint import Checkpoint, load_checkpoint, save_checkpoint, snapshot_checkpoint
from mean_field_dml.runners.sweep import RunSummary, SweepRow, parse_grid, run_sweep, summarize_runs
from mean_field_dml.runners.training import (
    TrainConfig,
    TrainResult,
    best_epoch,
    evaluate_checkpoint,
    evaluate_checkpoints,
    steps_to_fraction,
    train,
)

__all__ = [
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "snapshot_checkpoint",
    "RunSummary",
    "SweepRow",
    "parse_grid",
    "run_sweep",
    "summarize_runs",
    "TrainConfig",
    "TrainResult",
    "best_epoch",
    "evaluate_checkpoint",
    "evaluate_checkpoints",
    "steps_to_fraction",
    "train",
]
