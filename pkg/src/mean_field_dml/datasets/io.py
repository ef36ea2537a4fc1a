"""Feature-level dataset files.

CSV: a header row, then one row per sample: integer label first, then the f
feature values as decimals.

BIN (all little-endian): magic b"MFDM", u32 n, u32 f, n*f float32 features in
row-major order, n u32 labels.
"""

from __future__ import annotations

import csv
import io
import struct
from enum import StrEnum
from pathlib import Path

import numpy as np

from mean_field_dml.artifacts import atomic_write_bytes, atomic_write_text
from mean_field_dml.errors import DataError, DatasetFormatError
from mean_field_dml.models import Dataset

BIN_MAGIC = b"MFDM"
_BIN_HEADER = struct.Struct("<4sII")


class DatasetFormat(StrEnum):
    CSV = "csv"
    BIN = "bin"


def load_dataset(path: Path, format: DatasetFormat | str) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")
    if DatasetFormat(format) == DatasetFormat.CSV:
        return _read_csv(path)
    return _read_bin(path)


def save_dataset(ds: Dataset, path: Path, format: DatasetFormat | str) -> None:
    if np.any(ds.labels < 0):
        raise DataError("dataset labels must be non-negative to be written")
    if DatasetFormat(format) == DatasetFormat.CSV:
        atomic_write_text(Path(path), _csv_text(ds))
    else:
        atomic_write_bytes(Path(path), _bin_bytes(ds))


def _read_csv(path: Path) -> Dataset:
    payload = _read_bytes(path)
    try:
        text = payload.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = payload.count(b"\n", 0, exc.start) + 1
        raise DatasetFormatError(f"{path}: line {line}: byte offset {exc.start} is not valid UTF-8") from None
    with io.StringIO(text, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise DatasetFormatError(f"{path}: line 1: header must name a label column and at least one feature column")
        width = len(header)
        labels: list[int] = []
        rows: list[list[float]] = []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != width:
                raise DatasetFormatError(f"{path}: line {line}: expected {width} columns, found {len(row)}")
            try:
                label = int(row[0])
            except ValueError:
                raise DatasetFormatError(f"{path}: line {line}: label {row[0]!r} is not an integer") from None
            try:
                values = [float(cell) for cell in row[1:]]
            except ValueError:
                bad = next(cell for cell in row[1:] if not _is_number(cell))
                raise DatasetFormatError(f"{path}: line {line}: feature {bad!r} is not numeric") from None
            labels.append(label)
            rows.append(values)
    if not rows:
        raise DatasetFormatError(f"{path}: no data rows after the header")
    return Dataset(features=np.array(rows), labels=np.array(labels, dtype=np.int64), name=path.stem)


def _read_bin(path: Path) -> Dataset:
    payload = _read_bytes(path)
    if len(payload) < _BIN_HEADER.size:
        raise DatasetFormatError(f"{path}: offset 0: file shorter than the {_BIN_HEADER.size}-byte header")
    magic, n, f = _BIN_HEADER.unpack_from(payload, 0)
    if magic != BIN_MAGIC:
        raise DatasetFormatError(f"{path}: offset 0: bad magic {magic!r}, expected {BIN_MAGIC!r}")
    if n < 1 or f < 1:
        raise DatasetFormatError(f"{path}: offset 4: header declares {n} rows and {f} features")
    feature_bytes = 4 * n * f
    expected = _BIN_HEADER.size + feature_bytes + 4 * n
    if len(payload) < expected:
        raise DatasetFormatError(
            f"{path}: offset {len(payload)}: truncated payload, expected {expected} bytes for {n} x {f}"
        )
    if len(payload) > expected:
        raise DatasetFormatError(f"{path}: offset {expected}: {len(payload) - expected} trailing bytes")
    features = np.frombuffer(payload, dtype="<f4", count=n * f, offset=_BIN_HEADER.size).reshape(n, f)
    labels = np.frombuffer(payload, dtype="<u4", count=n, offset=_BIN_HEADER.size + feature_bytes)
    return Dataset(features=features.astype(np.float64), labels=labels.astype(np.int64), name=path.stem)


def _read_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc.strerror}") from None


def _csv_text(ds: Dataset) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["label", *(f"f{j}" for j in range(ds.feature_dim))])
    for label, row in zip(ds.labels, ds.features):
        writer.writerow([int(label), *(repr(float(value)) for value in row)])
    return buffer.getvalue()


def _bin_bytes(ds: Dataset) -> bytes:
    header = _BIN_HEADER.pack(BIN_MAGIC, ds.size, ds.feature_dim)
    features = np.ascontiguousarray(ds.features, dtype="<f4").tobytes()
    labels = np.ascontiguousarray(ds.labels, dtype="<u4").tobytes()
    return header + features + labels


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True
