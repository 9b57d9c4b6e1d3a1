"""Bit-exact binary snapshots of flow states.

Layout (little endian)::

    b"GMCF1\\n"                      6 bytes
    u32 m, u32 n, u32 N              12
    f64 L, f64 band                  16
    u8 mode (0 raw, 1 normalized)     1
    f64 time                          8
    u64 step_count                    8
    N^m * n f64 values, lexicographic node order, components fastest
"""

from __future__ import annotations

import struct

import numpy as np

from .grid import Grid, GridMap

MAGIC = b"GMCF1\n"
_HEADER = struct.Struct("<IIIddBdQ")
HEADER_SIZE = len(MAGIC) + _HEADER.size


class SnapshotError(ValueError):
    pass


def encode_snapshot(state) -> bytes:
    grid = state.grid
    mode = 0 if state.mode == "raw" else 1
    head = _HEADER.pack(grid.m, state.map.n, grid.N, grid.L, grid.band, mode,
                        float(state.time), int(state.step_count))
    payload = np.ascontiguousarray(state.map.values, dtype="<f8").tobytes()
    return MAGIC + head + payload


def decode_snapshot(data: bytes, expect: dict | None = None):
    from .flow import FlowState

    if data[: len(MAGIC)] != MAGIC:
        raise SnapshotError("bad magic")
    if len(data) < HEADER_SIZE:
        raise SnapshotError("truncated header")
    m, n, N, L, band, mode, time, steps = _HEADER.unpack_from(data, len(MAGIC))
    if mode not in (0, 1):
        raise SnapshotError(f"bad mode byte {mode}")
    for key, got in (("m", m), ("n", n), ("N", N)):
        if expect and key in expect and expect[key] != got:
            raise SnapshotError(f"dimension mismatch: {key}={got}, expected {expect[key]}")
    count = N**m * n
    body = data[HEADER_SIZE:]
    if len(body) != 8 * count:
        raise SnapshotError(f"truncated payload: {len(body)} bytes, expected {8 * count}")
    values = np.frombuffer(body, dtype="<f8").astype(float).reshape((N,) * m + (n,))
    grid = Grid(m, N, L, band)
    return FlowState(GridMap(grid, values), time, "raw" if mode == 0 else "normalized", steps)


def write_snapshot(state, path):
    with open(path, "wb") as fh:
        fh.write(encode_snapshot(state))


def read_snapshot(path, expect: dict | None = None):
    with open(path, "rb") as fh:
        return decode_snapshot(fh.read(), expect)
