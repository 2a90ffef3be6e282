"""Binary checkpoint format for named float32 tensors.

Layout, all little-endian:

    magic "XEDT" | format version u32 | records...

Each record is ``name_len u32 | name utf-8 | rank u32 | dims u64 * rank |
payload f32 * prod(dims)`` with the payload in row-major order. Records are
written in sorted name order so save(load(f)) reproduces ``f`` byte for byte.

A JSON metadata blob can ride along as a tensor of utf-8 byte values; see
``encode_json`` / ``decode_json``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ClipFormatError

MAGIC = b"XEDT"
FORMAT_VERSION = 1


def save_checkpoint(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    chunks = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name])
        if arr.dtype != np.float32:
            raise ValueError(f"tensor {name!r} must be float32, got {arr.dtype}")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", arr.ndim))
        for dim in arr.shape:
            chunks.append(struct.pack("<Q", dim))
        chunks.append(arr.astype("<f4", copy=False).tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    buf = Path(path).read_bytes()
    where = str(path)
    if len(buf) < 8 or buf[:4] != MAGIC:
        raise ClipFormatError(f"{where}: not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != FORMAT_VERSION:
        raise ClipFormatError(f"{where}: unsupported checkpoint version {version}")
    pos = 8
    out: dict[str, np.ndarray] = {}

    def take(n: int, what: str) -> int:
        nonlocal pos
        if pos + n > len(buf):
            raise ClipFormatError(f"{where}: truncated while reading {what} at byte {pos}")
        start = pos
        pos += n
        return start

    while pos < len(buf):
        (name_len,) = struct.unpack_from("<I", buf, take(4, "name length"))
        name = buf[take(name_len, "name") : pos].decode("utf-8")
        (rank,) = struct.unpack_from("<I", buf, take(4, f"rank of {name!r}"))
        dims = []
        for i in range(rank):
            (d,) = struct.unpack_from("<Q", buf, take(8, f"dim {i} of {name!r}"))
            dims.append(d)
        count = int(np.prod(dims, dtype=np.int64)) if dims else 1
        start = take(4 * count, f"payload of {name!r}")
        arr = np.frombuffer(buf, dtype="<f4", count=count, offset=start)
        out[name] = arr.reshape(dims).astype(np.float32, copy=True)
    return out


def encode_json(obj) -> np.ndarray:
    """JSON-encode an object as a float32 tensor of utf-8 byte values."""
    raw = json.dumps(obj, sort_keys=True).encode("utf-8")
    return np.frombuffer(raw, dtype=np.uint8).astype(np.float32)


def decode_json(arr: np.ndarray):
    raw = np.asarray(arr).astype(np.uint8).tobytes()
    return json.loads(raw.decode("utf-8"))
