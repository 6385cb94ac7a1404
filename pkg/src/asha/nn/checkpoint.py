"""Flat binary tensor container.

Layout (all little-endian): magic b"ASHA", format version u32, then per-tensor
records of [name_len u32, name utf-8, rank u32, dims u64 each, f32 payload].
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"ASHA"
VERSION = 1


class CheckpointError(IOError):
    pass


def save_tensors(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        for name, arr in tensors.items():
            data = np.asarray(arr, dtype="<f4")  # ascontiguousarray would promote 0-d to 1-d
            if not data.flags.c_contiguous:
                data = data.copy()
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<I", data.ndim))
            f.write(struct.pack(f"<{data.ndim}Q", *data.shape))
            f.write(data.tobytes())


def load_tensors(path: str | Path) -> dict[str, np.ndarray]:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"bad magic {blob[:4]!r}")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported version {version}")
    out: dict[str, np.ndarray] = {}
    off = 8
    while off < len(blob):
        (name_len,) = struct.unpack_from("<I", blob, off)
        off += 4
        name = blob[off : off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<I", blob, off)
        off += 4
        dims = struct.unpack_from(f"<{rank}Q", blob, off)
        off += 8 * rank
        count = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=off).reshape(dims)
        off += 4 * count
        out[name] = arr.copy()
    return out
