"""The ``LIDW`` binary container used for model checkpoints and feature files.

Layout (all integers little-endian)::

    b"LIDW"                      magic
    u16   format version         (currently 1)
    u16   kind length, kind      UTF-8 model kind: acoustic | text | fusion | features
    u32   meta length, meta      UTF-8 JSON object (sorted keys)
    u32   tensor count
    per tensor:
      u16 name length, name      UTF-8
      u32 rows, u32 cols
      rows*cols float32 values   row-major

Vectors are stored as a single row.  Reading then writing a file reproduces
it byte for byte.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Union

import numpy as np

from .errors import DataError

MAGIC = b"LIDW"
VERSION = 1


@dataclass
class Checkpoint:
    kind: str
    tensors: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)
    meta: dict = field(default_factory=dict)

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write(struct.pack("<H", VERSION))
        kind = self.kind.encode("utf-8")
        buf.write(struct.pack("<H", len(kind)) + kind)
        meta = json.dumps(self.meta, sort_keys=True, ensure_ascii=False).encode("utf-8")
        buf.write(struct.pack("<I", len(meta)) + meta)
        buf.write(struct.pack("<I", len(self.tensors)))
        for name, arr in self.tensors.items():
            arr = np.asarray(arr, dtype="<f4")
            if arr.ndim == 1:
                arr = arr[None, :]
            if arr.ndim != 2:
                raise DataError(f"tensor {name!r} must be 1-D or 2-D, got {arr.ndim}-D")
            bname = name.encode("utf-8")
            buf.write(struct.pack("<H", len(bname)) + bname)
            buf.write(struct.pack("<II", *arr.shape))
            buf.write(np.ascontiguousarray(arr).tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Checkpoint":
        view = memoryview(data)
        pos = 0

        def take(n):
            nonlocal pos
            if pos + n > len(view):
                raise DataError("truncated LIDW container")
            out = view[pos:pos + n]
            pos += n
            return out

        if bytes(take(4)) != MAGIC:
            raise DataError("not an LIDW container (bad magic)")
        (version,) = struct.unpack("<H", take(2))
        if version != VERSION:
            raise DataError(f"unsupported LIDW version {version}")
        (klen,) = struct.unpack("<H", take(2))
        kind = bytes(take(klen)).decode("utf-8")
        (mlen,) = struct.unpack("<I", take(4))
        meta = json.loads(bytes(take(mlen)).decode("utf-8"))
        (count,) = struct.unpack("<I", take(4))
        tensors = OrderedDict()
        for _ in range(count):
            (nlen,) = struct.unpack("<H", take(2))
            name = bytes(take(nlen)).decode("utf-8")
            rows, cols = struct.unpack("<II", take(8))
            arr = np.frombuffer(bytes(take(4 * rows * cols)), dtype="<f4").reshape(rows, cols)
            tensors[name] = arr.astype(np.float32)
        if pos != len(view):
            raise DataError("trailing bytes after LIDW tensors")
        return cls(kind, tensors, meta)

    def sha256(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def save(self, path: Union[str, Path]) -> str:
        data = self.to_bytes()
        Path(path).write_bytes(data)
        return hashlib.sha256(data).hexdigest()

    @classmethod
    def load(cls, path: Union[str, Path], kind: str = None) -> "Checkpoint":
        ckpt = cls.from_bytes(Path(path).read_bytes())
        if kind is not None and ckpt.kind != kind:
            raise DataError(f"{path}: expected a {kind!r} checkpoint, found {ckpt.kind!r}")
        return ckpt


def file_sha256(path: Union[str, Path]) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def vector(t: np.ndarray) -> np.ndarray:
    """Undo the one-row storage of a vector."""
    return t.reshape(-1).copy()


def save_features(path, frames: np.ndarray, meta: Dict = None) -> str:
    return Checkpoint("features", OrderedDict(lfbe=frames), dict(meta or {})).save(path)


def load_features(path) -> np.ndarray:
    return Checkpoint.load(path, kind="features").tensors["lfbe"].copy()
