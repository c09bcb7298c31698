"""Matrix files and sweep tables.

Binary matrices are a 16-byte header followed by float64 values in
row-major order, all little-endian::

    bytes 0-7    magic b"ETCMAT01"
    bytes 8-11   rows  (uint32)
    bytes 12-15  cols  (uint32)
"""

from __future__ import annotations

import csv
import os
import struct
from dataclasses import astuple, fields

import numpy as np

from ..errors import DomainError
from .mvm import SweepRow

MAGIC = b"ETCMAT01"
_HEADER = struct.Struct("<8sII")


def write_matrix_binary(path, a) -> None:
    a = np.asarray(a, dtype="<f8")
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise DomainError("only 2D matrices can be stored")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, a.shape[0], a.shape[1]))
        fh.write(np.ascontiguousarray(a).tobytes())


def read_matrix_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise DomainError(f"{path}: truncated header")
        magic, rows, cols = _HEADER.unpack(head)
        if magic != MAGIC:
            raise DomainError(f"{path}: not a matrix file (bad magic)")
        body = fh.read()
    if len(body) != rows * cols * 8:
        raise DomainError(f"{path}: expected {rows}x{cols} values, got {len(body) // 8}")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(float)


def write_matrix_csv(path, a) -> None:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in a:
            w.writerow([repr(float(v)) for v in row])


def read_matrix_csv(path) -> np.ndarray:
    try:
        a = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise DomainError(f"{path}: {exc}") from exc
    return a


def read_matrix(path) -> np.ndarray:
    """Load a matrix, choosing the format from the file's first bytes."""
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    with open(path, "rb") as fh:
        start = fh.read(len(MAGIC))
    return read_matrix_binary(path) if start == MAGIC else read_matrix_csv(path)


def write_matrix(path, a) -> None:
    if str(path).endswith(".csv"):
        write_matrix_csv(path, a)
    else:
        write_matrix_binary(path, a)


SWEEP_FIELDS = tuple(f.name for f in fields(SweepRow))


def write_sweep_csv(rows, dest) -> None:
    """Write to a path or an open text stream."""
    if hasattr(dest, "write"):
        _write_sweep(rows, dest)
    else:
        with open(dest, "w", newline="") as fh:
            _write_sweep(rows, fh)


def _write_sweep(rows, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SWEEP_FIELDS)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in astuple(r)])


def read_sweep_csv(path) -> list[SweepRow]:
    out = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            out.append(SweepRow(r["device"], int(r["array_rows"]), float(r["rw_ohms"]), r["encoding"],
                                float(r["normalized_rms"]), float(r["rms"]), float(r["signal_range"]),
                                int(r["seed"])))
    return out
