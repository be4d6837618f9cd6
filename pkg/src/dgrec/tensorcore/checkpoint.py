"""Binary checkpoints.

Layout (little-endian)::

    b"DGRC1" | u8 version | u64 entry count
    per entry: u32 name length | utf-8 name | u32 rank | rank * u64 dims
               | row-major float32 data
    u64 optimizer step

Adam moments are stored as ordinary entries named ``<param>/m`` and
``<param>/v``.
"""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

from .optim import AdamState

MAGIC = b"DGRC1"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _read(src: BinaryIO, n: int) -> bytes:
    buf = src.read(n)
    if len(buf) != n:
        raise CheckpointError("truncated checkpoint")
    return buf


def save_checkpoint(out: BinaryIO, arrays: dict[str, np.ndarray], adam: AdamState | None = None) -> None:
    entries = list(arrays.items())
    if adam is not None:
        for name in arrays:
            if name in adam.m:
                entries.append((f"{name}/m", adam.m[name]))
                entries.append((f"{name}/v", adam.v[name]))
    out.write(MAGIC)
    out.write(struct.pack("<BQ", VERSION, len(entries)))
    for name, arr in entries:
        raw = name.encode("utf-8")
        arr = np.ascontiguousarray(arr, dtype="<f4")
        out.write(struct.pack("<I", len(raw)) + raw)
        out.write(struct.pack(f"<I{arr.ndim}Q", arr.ndim, *arr.shape))
        out.write(arr.tobytes())
    out.write(struct.pack("<Q", adam.step if adam is not None else 0))


def load_checkpoint(src: BinaryIO) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray], int]:
    """Returns ``(params, adam_moments, step)``; moments keep their suffixes."""
    if _read(src, len(MAGIC)) != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    version, count = struct.unpack("<BQ", _read(src, 9))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    params, moments = {}, {}
    for _ in range(count):
        (n,) = struct.unpack("<I", _read(src, 4))
        name = _read(src, n).decode("utf-8")
        (rank,) = struct.unpack("<I", _read(src, 4))
        dims = struct.unpack(f"<{rank}Q", _read(src, 8 * rank))
        size = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(_read(src, 4 * size), dtype="<f4").reshape(dims).astype(np.float32)
        (moments if name.endswith(("/m", "/v")) else params)[name] = arr
    (step,) = struct.unpack("<Q", _read(src, 8))
    return params, moments, step
