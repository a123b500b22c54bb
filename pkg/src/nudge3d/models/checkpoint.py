"""Versioned binary checkpoints, magic ``NNM1``.

Layout, little-endian: magic, u32 tag length + architecture tag, u32 class
count, u32 neighbor count, u32 array count, then per array: u32 name length
+ name, u32 rank, u32 dims, float32 payload row-major.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from ..errors import InvalidInput
from .base import ModelParams

_MAGIC = b"NNM1"


def model_to_bytes(model: ModelParams) -> bytes:
    tag = model.arch.encode("utf-8")
    out = [_MAGIC, struct.pack("<I", len(tag)), tag,
           struct.pack("<III", model.n_classes, model.k, len(model.params))]
    for name, arr in model.params.items():
        nb = name.encode("utf-8")
        out.append(struct.pack("<I", len(nb)))
        out.append(nb)
        out.append(struct.pack("<I", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(out)


def model_from_bytes(data: bytes) -> ModelParams:
    view = memoryview(data)
    pos = 0

    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(view):
            raise InvalidInput("truncated NNM1 data")
        vals = struct.unpack_from(fmt, view, pos)
        pos += size
        return vals

    (magic,) = take("<4s")
    if magic != _MAGIC:
        raise InvalidInput(f"bad magic {magic!r}, expected {_MAGIC!r}")
    (tag_len,) = take("<I")
    arch = bytes(view[pos:pos + tag_len]).decode("utf-8")
    pos += tag_len
    n_classes, k, n_arrays = take("<III")
    params: dict[str, np.ndarray] = {}
    for _ in range(n_arrays):
        (name_len,) = take("<I")
        name = bytes(view[pos:pos + name_len]).decode("utf-8")
        pos += name_len
        (rank,) = take("<I")
        dims = take(f"<{rank}I")
        count = int(np.prod(dims)) if rank else 1
        end = pos + 4 * count
        if end > len(view):
            raise InvalidInput("truncated NNM1 array payload")
        arr = np.frombuffer(view[pos:end], dtype="<f4").reshape(dims)
        pos += 4 * count
        params[name] = arr.astype(np.float64)
    if pos != len(view):
        raise InvalidInput(f"{len(view) - pos} trailing bytes after NNM1 payload")
    return ModelParams(arch, n_classes, params, k=k)


def save_model(path: str | Path, model: ModelParams) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def load_model(path: str | Path) -> ModelParams:
    return model_from_bytes(Path(path).read_bytes())


def checkpoint_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
