"""Parameter-group optimizers: SGD with momentum, RMSprop and AdamW.

Parameters are grouped by `GroupId` so the model and the mean fields can run at
different learning rates. `step` is pure: it returns fresh arrays and a fresh
state and never touches its inputs.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np

from mean_field_dml.errors import ConfigError, ShapeError
from mean_field_dml.schema import OptimizerKind

RMS_EPS = 1e-8
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

GroupedArrays = Mapping[str, Mapping[str, np.ndarray]]

_BUFFERS: Mapping[OptimizerKind, tuple[str, ...]] = {
    OptimizerKind.SGD: ("velocity",),
    OptimizerKind.RMSPROP: ("square_avg",),
    OptimizerKind.ADAMW: ("exp_avg", "exp_avg_sq"),
}


class GroupId(StrEnum):
    MODEL = "model"
    MEANFIELDS = "meanfields"


@dataclass(frozen=True)
class ParamGroup:
    id: GroupId
    lr: float
    weight_decay: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.lr) or self.lr <= 0:
            raise ConfigError(f"optimizer.{self.id.value}_lr must be a finite value > 0, got {self.lr}")
        if not math.isfinite(self.weight_decay) or self.weight_decay < 0:
            raise ConfigError(f"optimizer.weight_decay must be >= 0, got {self.weight_decay}")


@dataclass(slots=True)
class OptimizerState:
    """Moment buffers keyed by "group/param/buffer" plus the step counter."""

    kind: OptimizerKind
    step: int = 0
    buffers: dict[str, np.ndarray] = field(default_factory=dict)

    def copy(self) -> OptimizerState:
        return OptimizerState(
            kind=self.kind,
            step=self.step,
            buffers={key: value.copy() for key, value in self.buffers.items()},
        )


@dataclass(frozen=True)
class OptimizerSpec:
    """Optimizer kind with the per-group learning rates and the kind-specific constants."""

    kind: OptimizerKind = OptimizerKind.ADAMW
    model_lr: float = 1e-4
    meanfield_lr: float = 2e-1
    weight_decay: float = 0.0
    momentum: float = 0.9
    rms_decay: float = 0.99

    def __post_init__(self) -> None:
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"optimizer.momentum must lie in [0, 1), got {self.momentum}")
        if not 0.0 < self.rms_decay < 1.0:
            raise ConfigError(f"optimizer.rms_decay must lie in (0, 1), got {self.rms_decay}")
        self.groups()

    def groups(self) -> list[ParamGroup]:
        return [
            ParamGroup(id=GroupId.MODEL, lr=self.model_lr, weight_decay=self.weight_decay),
            ParamGroup(id=GroupId.MEANFIELDS, lr=self.meanfield_lr, weight_decay=self.weight_decay),
        ]


def init_state(kind: OptimizerKind, params: GroupedArrays) -> OptimizerState:
    buffers = {
        _buffer_key(group, name, buffer): np.zeros_like(value, dtype=np.float64)
        for group, arrays in params.items()
        for name, value in arrays.items()
        for buffer in _BUFFERS[kind]
    }
    return OptimizerState(kind=kind, buffers=buffers)


def step(
    kind: OptimizerKind,
    groups: Sequence[ParamGroup],
    params: GroupedArrays,
    grads: GroupedArrays,
    state: OptimizerState | None,
    *,
    momentum: float = 0.0,
    rms_decay: float = 0.99,
) -> tuple[dict[str, dict[str, np.ndarray]], OptimizerState]:
    """Apply one update to every parameter of every group."""
    by_id = _index_groups(groups)
    if state is None or state.kind != kind:
        found = "no state" if state is None else f"state for {state.kind.value}"
        raise ConfigError(f"optimizer {kind.value} needs an initialised state, got {found}")

    t = state.step + 1
    new_state = OptimizerState(kind=kind, step=t, buffers=dict(state.buffers))
    new_params: dict[str, dict[str, np.ndarray]] = {}
    for group_name, arrays in params.items():
        group = by_id.get(str(group_name))
        if group is None:
            raise ConfigError(f"parameters for group {group_name!r} have no optimizer group")
        group_grads = grads.get(group_name, {})
        updated: dict[str, np.ndarray] = {}
        for name, value in arrays.items():
            grad = group_grads.get(name)
            if grad is None or grad.shape != value.shape:
                found = None if grad is None else grad.shape
                raise ShapeError(f"gradient for {group_name}/{name} has shape {found}, parameter has {value.shape}")
            buffers = _buffers_for(new_state, str(group_name), name, value.shape)
            if kind == OptimizerKind.SGD:
                updated[name] = _sgd(value, grad, group, buffers, momentum)
            elif kind == OptimizerKind.RMSPROP:
                updated[name] = _rmsprop(value, grad, group, buffers, rms_decay)
            else:
                updated[name] = _adamw(value, grad, group, buffers, t)
            for buffer, array in buffers.items():
                new_state.buffers[_buffer_key(str(group_name), name, buffer)] = array
        new_params[str(group_name)] = updated
    return new_params, new_state


class Optimizer:
    """Binds an `OptimizerSpec` to a running state."""

    def __init__(self, spec: OptimizerSpec, params: GroupedArrays) -> None:
        self._spec = spec
        self._groups = spec.groups()
        self.state = init_state(spec.kind, params)

    @property
    def spec(self) -> OptimizerSpec:
        return self._spec

    def step(self, params: GroupedArrays, grads: GroupedArrays) -> dict[str, dict[str, np.ndarray]]:
        updated, self.state = step(
            self._spec.kind,
            self._groups,
            params,
            grads,
            self.state,
            momentum=self._spec.momentum,
            rms_decay=self._spec.rms_decay,
        )
        return updated


def _sgd(p: np.ndarray, g: np.ndarray, group: ParamGroup, buffers: dict[str, np.ndarray], momentum: float) -> np.ndarray:
    if group.weight_decay:
        g = g + group.weight_decay * p
    velocity = momentum * buffers["velocity"] + g
    buffers["velocity"] = velocity
    return p - group.lr * velocity


def _rmsprop(p: np.ndarray, g: np.ndarray, group: ParamGroup, buffers: dict[str, np.ndarray], rho: float) -> np.ndarray:
    if group.weight_decay:
        g = g + group.weight_decay * p
    square_avg = rho * buffers["square_avg"] + (1.0 - rho) * g * g
    buffers["square_avg"] = square_avg
    return p - group.lr * g / (np.sqrt(square_avg) + RMS_EPS)


def _adamw(p: np.ndarray, g: np.ndarray, group: ParamGroup, buffers: dict[str, np.ndarray], t: int) -> np.ndarray:
    p = p * (1.0 - group.lr * group.weight_decay)
    exp_avg = ADAM_BETA1 * buffers["exp_avg"] + (1.0 - ADAM_BETA1) * g
    exp_avg_sq = ADAM_BETA2 * buffers["exp_avg_sq"] + (1.0 - ADAM_BETA2) * g * g
    buffers["exp_avg"] = exp_avg
    buffers["exp_avg_sq"] = exp_avg_sq
    m_hat = exp_avg / (1.0 - ADAM_BETA1**t)
    v_hat = exp_avg_sq / (1.0 - ADAM_BETA2**t)
    return p - group.lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def _index_groups(groups: Sequence[ParamGroup]) -> dict[str, ParamGroup]:
    by_id: dict[str, ParamGroup] = {}
    for group in groups:
        if group.id.value in by_id:
            raise ConfigError(f"optimizer group {group.id.value!r} is listed twice")
        by_id[group.id.value] = group
    return by_id


def _buffers_for(state: OptimizerState, group: str, name: str, shape: tuple[int, ...]) -> dict[str, np.ndarray]:
    buffers: dict[str, np.ndarray] = {}
    for buffer in _BUFFERS[state.kind]:
        key = _buffer_key(group, name, buffer)
        value = state.buffers.get(key)
        if value is None:
            raise ConfigError(f"optimizer state has no {buffer} buffer for {group}/{name}")
        if value.shape != shape:
            raise ShapeError(f"optimizer buffer {key} has shape {value.shape}, parameter has {shape}")
        buffers[buffer] = value
    return buffers


def _buffer_key(group: str, name: str, buffer: str) -> str:
    return f"{group}/{name}/{buffer}"
