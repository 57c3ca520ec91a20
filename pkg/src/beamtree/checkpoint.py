"""Binary checkpoint files for named parameter tensors.

Layout: magic b"BTCK", format version u32, count u32, then per tensor:
name (u32 length + UTF-8), rank u32, extents (u32 each), payload as
little-endian float32. All integers little-endian.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"BTCK"
VERSION = 1


class CheckpointError(Exception):
    pass


def save_checkpoint(path, named: dict):
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<I", len(named)))
        for name, arr in named.items():
            data = np.ascontiguousarray(arr, dtype="<f4")
            nb = name.encode("utf-8")
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", data.ndim))
            for ext in data.shape:
                f.write(struct.pack("<I", ext))
            f.write(data.tobytes())


def load_checkpoint(path) -> dict:
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise CheckpointError("bad magic bytes")
        (version,) = struct.unpack("<I", f.read(4))
        if version != VERSION:
            raise CheckpointError(f"unknown checkpoint version {version}")
        (count,) = struct.unpack("<I", f.read(4))
        named = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<I", f.read(4))
            name = f.read(nlen).decode("utf-8")
            (rank,) = struct.unpack("<I", f.read(4))
            shape = tuple(struct.unpack("<I", f.read(4))[0] for _ in range(rank))
            n = int(np.prod(shape)) if shape else 1
            payload = f.read(4 * n)
            if len(payload) != 4 * n:
                raise CheckpointError("truncated checkpoint payload")
            named[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
    return named


def restore(params: dict, named: dict):
    """Copy loaded arrays into live parameter tensors, rejecting shape mismatches."""
    for name, tensor in params.items():
        if name not in named:
            raise CheckpointError(f"checkpoint missing parameter {name}")
        arr = named[name]
        if arr.shape != tensor.data.shape:
            raise CheckpointError(
                f"shape mismatch for {name}: {arr.shape} vs {tensor.data.shape}")
        tensor.data[...] = arr.astype(tensor.data.dtype)
