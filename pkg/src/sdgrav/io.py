"""CMAF snapshots and CSV reports, both written atomically.

CMAF layout (little-endian throughout):

    4s   magic b"CMAF"
    u32  format version
    i8   ε
    3u32 nx, ny, nz
    3f64 Lx, Ly, Lz
    f64  t
    6f64 background (κ_t, κ_x, κ_y, κ_z, A, ±k)   sign of the last entry = harmonic sign
    f64  u_fluct[nx*ny*nz]   C order, z fastest
    f64  v_fluct[nx*ny*nz]
"""
from __future__ import annotations

import csv
import io as _io
import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .calculus import Grid3
from .state import Background, FieldState

MAGIC = b"CMAF"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIb3I3dd6d")


class SnapshotError(ValueError):
    pass


def atomic_write(path, data: bytes) -> None:
    """Write bytes to ``path`` via a temporary file in the same directory and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_snapshot(s: FieldState) -> bytes:
    g = s.grid
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, int(s.epsilon), *g.shape, *g.lengths, float(s.t),
                          *s.background.packed())
    le = np.dtype("<f8")
    return header + np.ascontiguousarray(s.u_fluct, dtype=le).tobytes() + np.ascontiguousarray(s.v_fluct, dtype=le).tobytes()


def decode_snapshot(data: bytes, delta_a: float = 0.1) -> FieldState:
    if len(data) < _HEADER.size:
        raise SnapshotError("truncated CMAF header")
    magic, version, eps, nx, ny, nz, Lx, Ly, Lz, t, *bg = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise SnapshotError(f"unsupported CMAF version {version}")
    grid = Grid3(nx, ny, nz, Lx, Ly, Lz)
    n = nx * ny * nz
    expected = _HEADER.size + 16 * n
    if len(data) != expected:
        raise SnapshotError(f"CMAF payload has {len(data)} bytes, expected {expected}")
    arr = np.frombuffer(data, dtype="<f8", offset=_HEADER.size, count=2 * n).astype(float)
    u, v = arr[:n].reshape(grid.shape), arr[n:].reshape(grid.shape)
    return FieldState(grid, t, eps, u, v, Background.from_packed(bg), delta_a)


def write_snapshot(path, s: FieldState) -> None:
    atomic_write(path, encode_snapshot(s))


def read_snapshot(path, delta_a: float = 0.1) -> FieldState:
    return decode_snapshot(Path(path).read_bytes(), delta_a)


def csv_bytes(header: Sequence[str], rows: Iterable[Sequence]) -> bytes:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue().encode()


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    atomic_write(path, csv_bytes(header, rows))
