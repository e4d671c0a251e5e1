"""Versioned binary checkpoint format.

Layout: magic "HZF1", little-endian u32 tensor count, then per tensor:
u32 name length, UTF-8 name, u32 rank, u32 dims, float32 payload.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"HZF1"


class CheckpointError(ValueError):
    pass


def save_tensors(tensors: dict, path) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            # note: ascontiguousarray would promote rank-0 arrays to rank 1;
            # tobytes() already serializes in C order regardless of layout
            arr = np.asarray(arr, dtype=np.float32)
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<I", arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<I", d))
            f.write(arr.tobytes())


def load_tensors(path) -> dict:
    with open(path, "rb") as f:
        payload = f.read()
    if payload[:4] != MAGIC:
        raise CheckpointError(f"bad checkpoint magic in {path!r}")
    pos = 4

    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(payload):
            raise CheckpointError("truncated checkpoint")
        out = struct.unpack_from(fmt, payload, pos)
        pos += size
        return out

    (count,) = take("<I")
    tensors = {}
    for _ in range(count):
        (nlen,) = take("<I")
        if pos + nlen > len(payload):
            raise CheckpointError("truncated checkpoint")
        name = payload[pos : pos + nlen].decode("utf-8")
        pos += nlen
        (rank,) = take("<I")
        dims = tuple(take("<I")[0] for _ in range(rank))
        n = int(np.prod(dims)) if dims else 1
        nbytes = 4 * n
        if pos + nbytes > len(payload):
            raise CheckpointError("truncated checkpoint")
        arr = np.frombuffer(payload, dtype="<f4", count=n, offset=pos).reshape(dims)
        pos += nbytes
        tensors[name] = arr.astype(np.float64)
    if pos != len(payload):
        raise CheckpointError("trailing bytes after last tensor")
    return tensors


def encode_seed(seed: int) -> np.ndarray:
    # float32 payload: split into exact 16-bit halves
    seed = int(seed) & 0xFFFFFFFF
    return np.array([seed >> 16, seed & 0xFFFF], dtype=np.float64)


def decode_seed(arr) -> int:
    hi, lo = (int(v) for v in np.asarray(arr).ravel())
    return (hi << 16) | lo
