"""NLSF1 binary field snapshots.

Layout (all little-endian)::

    8 bytes   magic  b"NLSF1\\0\\0\\0"
    u32       format version (1)
    u32       reserved (0)
    u32       dims
    u32       points per axis M
    f64       box extent L
    M^N x (f64 re, f64 im), row-major axis order
"""
from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .errors import GridError
from .grid import ComplexField, Grid

MAGIC = b"NLSF1\x00\x00\x00"
VERSION = 1
_HEADER = struct.Struct("<8sII")
_META = struct.Struct("<IId")


def encode(u: ComplexField) -> bytes:
    g = u.grid
    body = np.ascontiguousarray(u.values, dtype="<c16").tobytes(order="C")
    return _HEADER.pack(MAGIC, VERSION, 0) + _META.pack(g.dims, g.points, g.extent) + body


def decode(data: bytes) -> ComplexField:
    if len(data) < _HEADER.size + _META.size:
        raise GridError("truncated NLSF1 header")
    magic, version, _ = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise GridError(f"bad NLSF1 magic {magic!r}")
    if version != VERSION:
        raise GridError(f"unsupported NLSF1 version {version}")
    dims, points, extent = _META.unpack_from(data, _HEADER.size)
    grid = Grid(dims, extent, points)
    offset = _HEADER.size + _META.size
    expected = grid.size * 16
    if len(data) - offset != expected:
        raise GridError(f"NLSF1 payload is {len(data) - offset} bytes, expected {expected}")
    values = np.frombuffer(data, dtype="<c16", offset=offset).reshape(grid.shape)
    return ComplexField(grid, values.astype(complex))


def write_snapshot(path, u: ComplexField) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode(u))
    os.replace(tmp, path)
    return path


def read_snapshot(path) -> ComplexField:
    return decode(Path(path).read_bytes())
