"""Load/save signal sets.

Binary layout (extension ``.gpd``), all little-endian:

    magic "GPD1" | u32 n | u32 T | f64 sample_rate | u8 labeled
    n*T f32 samples (row per signal) | n u8 labels (only if labeled)

Record metadata is canonical in the binary format: id = row index,
group = id // 3, phase = id % 3. CSV carries metadata explicitly with
header ``id,group,phase,label,s0..s{T-1}`` (label field empty when
unlabeled); the CSV format does not store a sample rate, so CSV loads
take it as an argument.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import (
    HeaderMismatchError,
    IoFailureError,
    LabelMissingError,
    MissingFileError,
)
from .signals import SignalRecord, SignalSet

MAGIC = b"GPD1"
_HEADER = struct.Struct("<4sIIdB")


def _infer_format(path, format):
    if format is not None:
        if format not in ("binary-f32", "csv"):
            raise ValueError(f"unknown format {format!r}")
        return format
    suffix = Path(path).suffix.lower()
    return "csv" if suffix == ".csv" else "binary-f32"


def load_signal_set(path, format=None, sample_rate_hz=1.0) -> SignalSet:
    """Load and validate a signal set.

    ``format`` is "binary-f32" or "csv"; when None it is inferred from
    the extension (.csv -> csv, anything else -> binary).
    ``sample_rate_hz`` is only used for CSV files.
    """
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"no such file: {path}")
    fmt = _infer_format(path, format)
    if fmt == "binary-f32":
        return _load_binary(path)
    return _load_csv(path, sample_rate_hz)


def save_signal_set(signal_set: SignalSet, path, format=None) -> None:
    """Write a signal set; binary saves round-trip bit-exactly."""
    path = Path(path)
    fmt = _infer_format(path, format)
    try:
        if fmt == "binary-f32":
            _save_binary(signal_set, path)
        else:
            _save_csv(signal_set, path)
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from exc


def _load_binary(path) -> SignalSet:
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise HeaderMismatchError(f"{path}: file shorter than header")
    magic, n, T, rate, labeled_flag = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise HeaderMismatchError(f"{path}: bad magic {magic!r}")
    labeled = bool(labeled_flag)
    expected = _HEADER.size + n * T * 4 + (n if labeled else 0)
    if len(raw) != expected:
        raise HeaderMismatchError(
            f"{path}: header declares {expected} bytes, file has {len(raw)}"
        )
    offset = _HEADER.size
    samples = np.frombuffer(raw, dtype="<f4", count=n * T, offset=offset)
    samples = samples.reshape(n, T)
    labels = None
    if labeled:
        labels = np.frombuffer(raw, dtype=np.uint8, count=n,
                               offset=offset + n * T * 4)
        bad = ~np.isin(labels, (0, 1))
        if bad.any():
            raise LabelMissingError(f"{path}: labels must be 0/1")
    records = [
        SignalRecord(
            id=i, group_id=i // 3, phase=i % 3,
            samples=samples[i], sample_rate_hz=rate,
            label=int(labels[i]) if labeled else None,
        )
        for i in range(n)
    ]
    return SignalSet(records, T=T, sample_rate_hz=rate, labeled=labeled)


def _save_binary(signal_set: SignalSet, path) -> None:
    n = len(signal_set)
    header = _HEADER.pack(MAGIC, n, signal_set.T, signal_set.sample_rate_hz,
                          1 if signal_set.labeled else 0)
    with open(path, "wb") as fh:
        fh.write(header)
        for rec in signal_set.records:
            fh.write(np.ascontiguousarray(rec.samples, dtype="<f4").tobytes())
        if signal_set.labeled:
            labels = np.array([r.label for r in signal_set.records],
                              dtype=np.uint8)
            fh.write(labels.tobytes())


def _save_csv(signal_set: SignalSet, path) -> None:
    header = ["id", "group", "phase", "label"]
    header += [f"s{i}" for i in range(signal_set.T)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in signal_set.records:
            label = "" if rec.label is None else rec.label
            row = [rec.id, rec.group_id, rec.phase, label]
            row += [repr(float(v)) for v in rec.samples]
            writer.writerow(row)


def _load_csv(path, sample_rate_hz) -> SignalSet:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise HeaderMismatchError(f"{path}: empty file") from None
        if header[:4] != ["id", "group", "phase", "label"]:
            raise HeaderMismatchError(
                f"{path}: expected header id,group,phase,label,s0..."
            )
        T = len(header) - 4
        rows = [row for row in reader if row]  # tolerate trailing newline
    records = []
    labels_seen = []
    for row in rows:
        if len(row) != 4 + T:
            raise HeaderMismatchError(
                f"{path}: row for id {row[0]} has {len(row) - 4} samples, "
                f"header declares {T}"
            )
        label = None if row[3] == "" else int(row[3])
        labels_seen.append(label)
        samples = np.array(row[4:], dtype=np.float64).astype(np.float32)
        records.append(
            SignalRecord(id=int(row[0]), group_id=int(row[1]),
                         phase=int(row[2]), samples=samples,
                         sample_rate_hz=sample_rate_hz, label=label)
        )
    has_label = [lab is not None for lab in labels_seen]
    if any(has_label) and not all(has_label):
        raise LabelMissingError(f"{path}: some rows labeled, some not")
    labeled = bool(records) and all(has_label)
    return SignalSet(records, T=T, sample_rate_hz=sample_rate_hz,
                     labeled=labeled)
