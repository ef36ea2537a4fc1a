"""Binary checkpoint files.

Layout, all integers little-endian u32:

    b"MFDMCKPT"                 magic, 8 bytes
    version                     currently 1
    metadata length L, then L bytes of UTF-8 JSON (sorted keys)
    tensor count T
    T tensors, each: ndim, ndim dims, prod(dims) little-endian float32 values

Tensors appear in the order listed under "tensors" in the metadata: model
parameters by name, then the mean-field vectors when present, then the
optimizer buffers by key.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from mean_field_dml.artifacts import atomic_write_bytes
from mean_field_dml.embedding import Backbone, ModelParams, ModelSpec
from mean_field_dml.errors import CheckpointError
from mean_field_dml.models import MeanFieldBank
from mean_field_dml.optim import OptimizerState
from mean_field_dml.schema import DistanceKind, ModelKind, OptimizerKind

CHECKPOINT_MAGIC = b"MFDMCKPT"
CHECKPOINT_VERSION = 1
_U32 = struct.Struct("<I")
_BANK_TENSOR = "meanfields/vectors"


@dataclass(slots=True)
class Checkpoint:
    model: ModelSpec
    feature_dim: int
    num_rows: int
    params: ModelParams
    bank: MeanFieldBank | None
    optimizer: OptimizerState
    epoch: int
    best_map_at_r: float
    distance: DistanceKind
    dataset_fingerprint: str = ""

    def build_model(self) -> Backbone:
        return self.model.build(feature_dim=self.feature_dim, num_rows=self.num_rows)

    def tensors(self) -> list[tuple[str, np.ndarray]]:
        named = [(f"model/{name}", self.params.arrays[name]) for name in sorted(self.params.arrays)]
        if self.bank is not None:
            named.append((_BANK_TENSOR, self.bank.vectors))
        named.extend((f"optimizer/{key}", self.optimizer.buffers[key]) for key in sorted(self.optimizer.buffers))
        return named

    def metadata(self) -> dict[str, Any]:
        return {
            "model": {
                "kind": self.model.kind.value,
                "embedding_dim": self.model.embedding_dim,
                "hidden_dim": self.model.hidden_dim,
                "feature_dim": self.feature_dim,
                "num_rows": self.num_rows,
                "params_version": self.params.version,
            },
            "optimizer": {"kind": self.optimizer.kind.value, "step": self.optimizer.step},
            "epoch": self.epoch,
            "best_map_at_r": self.best_map_at_r,
            "distance": self.distance.value,
            "dataset_fingerprint": self.dataset_fingerprint,
            "tensors": [name for name, _ in self.tensors()],
        }


def snapshot_checkpoint(
    *,
    model: ModelSpec,
    feature_dim: int,
    num_rows: int,
    params: ModelParams,
    bank: MeanFieldBank | None,
    optimizer: OptimizerState,
    epoch: int,
    best_map_at_r: float,
    distance: DistanceKind,
    dataset_fingerprint: str = "",
) -> Checkpoint:
    """Copy live training state into a checkpoint, rounding every tensor to float32."""
    return Checkpoint(
        model=model,
        feature_dim=feature_dim,
        num_rows=num_rows,
        params=ModelParams(
            arrays={name: _quantize(value) for name, value in params.arrays.items()},
            version=params.version,
        ),
        bank=None if bank is None else MeanFieldBank(vectors=_quantize(bank.vectors)),
        optimizer=OptimizerState(
            kind=optimizer.kind,
            step=optimizer.step,
            buffers={key: _quantize(value) for key, value in optimizer.buffers.items()},
        ),
        epoch=epoch,
        best_map_at_r=best_map_at_r,
        distance=distance,
        dataset_fingerprint=dataset_fingerprint,
    )


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    meta = json.dumps(ckpt.metadata(), sort_keys=True).encode("utf-8")
    tensors = ckpt.tensors()
    parts = [CHECKPOINT_MAGIC, _U32.pack(CHECKPOINT_VERSION), _U32.pack(len(meta)), meta, _U32.pack(len(tensors))]
    for _, value in tensors:
        parts.append(_U32.pack(value.ndim))
        parts.extend(_U32.pack(dim) for dim in value.shape)
        parts.append(np.ascontiguousarray(value, dtype="<f4").tobytes())
    return b"".join(parts)


def save_checkpoint(ckpt: Checkpoint, path: Path) -> None:
    atomic_write_bytes(Path(path), encode_checkpoint(ckpt))


def load_checkpoint(path: Path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    return decode_checkpoint(path.read_bytes(), source=str(path))


def decode_checkpoint(payload: bytes, source: str = "<bytes>") -> Checkpoint:
    reader = _Reader(payload, source)
    magic = reader.take(len(CHECKPOINT_MAGIC))
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{source}: offset 0: bad magic {magic!r}")
    version = reader.u32()
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{source}: offset 8: unsupported checkpoint version {version}")
    meta_offset = reader.offset
    raw_meta = reader.take(reader.u32())
    try:
        meta = json.loads(raw_meta.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{source}: offset {meta_offset}: unreadable metadata ({exc})") from None

    names = meta.get("tensors", [])
    count = reader.u32()
    if count != len(names):
        raise CheckpointError(f"{source}: metadata lists {len(names)} tensors, file holds {count}")
    tensors: dict[str, np.ndarray] = {}
    for name in names:
        ndim = reader.u32()
        shape = tuple(reader.u32() for _ in range(ndim))
        size = int(np.prod(shape, dtype=np.int64))
        data = reader.take(4 * size)
        tensors[name] = np.frombuffer(data, dtype="<f4").astype(np.float64).reshape(shape)
    if reader.offset != len(payload):
        raise CheckpointError(f"{source}: offset {reader.offset}: {len(payload) - reader.offset} trailing bytes")

    try:
        return _assemble(meta, tensors)
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{source}: inconsistent checkpoint metadata ({exc})") from None


def _assemble(meta: dict[str, Any], tensors: dict[str, np.ndarray]) -> Checkpoint:
    model_meta = meta["model"]
    optimizer_meta = meta["optimizer"]
    params = {name.removeprefix("model/"): value for name, value in tensors.items() if name.startswith("model/")}
    buffers = {
        name.removeprefix("optimizer/"): value for name, value in tensors.items() if name.startswith("optimizer/")
    }
    bank = MeanFieldBank(vectors=tensors[_BANK_TENSOR]) if _BANK_TENSOR in tensors else None
    return Checkpoint(
        model=ModelSpec(
            kind=ModelKind(model_meta["kind"]),
            embedding_dim=int(model_meta["embedding_dim"]),
            hidden_dim=int(model_meta["hidden_dim"]),
        ),
        feature_dim=int(model_meta["feature_dim"]),
        num_rows=int(model_meta["num_rows"]),
        params=ModelParams(arrays=params, version=int(model_meta["params_version"])),
        bank=bank,
        optimizer=OptimizerState(kind=OptimizerKind(optimizer_meta["kind"]), step=int(optimizer_meta["step"]), buffers=buffers),
        epoch=int(meta["epoch"]),
        best_map_at_r=float(meta["best_map_at_r"]),
        distance=DistanceKind(meta["distance"]),
        dataset_fingerprint=str(meta.get("dataset_fingerprint", "")),
    )


class _Reader:
    def __init__(self, payload: bytes, source: str) -> None:
        self._payload = payload
        self._source = source
        self.offset = 0

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self._payload):
            raise CheckpointError(
                f"{self._source}: offset {self.offset}: truncated, needed {size} bytes, {len(self._payload) - self.offset} left"
            )
        chunk = self._payload[self.offset : end]
        self.offset = end
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(_U32.size))[0]


def _quantize(value: np.ndarray) -> np.ndarray:
    return np.asarray(value, dtype=np.float32).astype(np.float64)
