"""Versioned binary file of named arrays, plus a JSON sidecar.

Layout (little-endian)::

    b"FDTN" | u16 version | u32 count
    repeated: u16 name_len | name (utf-8) | u8 dtype | u8 ndim | u32 dims[ndim] | data

Arrays are written in the given order, so identical inputs give identical
bytes. The sidecar ``<file>.json`` records caller metadata and the SHA-256 of
the binary.
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import ForestDriverError

MAGIC = b"FDTN"
VERSION = 1
_DTYPES = {0: "<f4", 1: "<f8", 2: "<i8", 3: "|u1", 4: "<i4"}
_CODES = {(np.dtype(v).kind, np.dtype(v).itemsize): k for k, v in _DTYPES.items()}


class TensorFileError(ForestDriverError):
    pass


def dumps(arrays) -> bytes:
    """Serialize an ordered mapping of name -> array."""
    out = [MAGIC, struct.pack("<HI", VERSION, len(arrays))]
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        if arr.dtype == np.bool_:
            arr = arr.astype(np.uint8)
        key = (arr.dtype.kind, arr.dtype.itemsize)
        if key not in _CODES:
            raise TensorFileError(f"unsupported dtype {arr.dtype} for {name!r}")
        raw = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw)) + raw)
        out.append(struct.pack("<BB", _CODES[key], arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype=_DTYPES[_CODES[key]]).tobytes())
    return b"".join(out)


def loads(blob: bytes) -> dict:
    if blob[:4] != MAGIC:
        raise TensorFileError("not a tensor file (bad magic)")
    version, count = struct.unpack_from("<HI", blob, 4)
    if version != VERSION:
        raise TensorFileError(f"unsupported tensor file version {version}")
    pos = 10
    arrays = {}
    for _ in range(count):
        (n,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos:pos + n].decode("utf-8")
        pos += n
        code, ndim = struct.unpack_from("<BB", blob, pos)
        pos += 2
        shape = struct.unpack_from(f"<{ndim}I", blob, pos)
        pos += 4 * ndim
        dtype = np.dtype(_DTYPES[code])
        size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        arrays[name] = np.frombuffer(blob, dtype=dtype, count=size // dtype.itemsize,
                                     offset=pos).reshape(shape).copy()
        pos += size
    return arrays


def save(path, arrays, meta=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = dumps(arrays)
    path.write_bytes(blob)
    sidecar = dict(meta or {})
    sidecar["format_version"] = VERSION
    sidecar["sha256"] = hashlib.sha256(blob).hexdigest()
    sidecar_path(path).write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")
    return path


def load(path):
    """Return ``(arrays, meta)``; verifies the sidecar checksum when present."""
    path = Path(path)
    blob = path.read_bytes()
    meta = {}
    sc = sidecar_path(path)
    if sc.exists():
        meta = json.loads(sc.read_text(encoding="utf-8"))
        digest = meta.get("sha256")
        if digest and digest != hashlib.sha256(blob).hexdigest():
            raise TensorFileError(f"{path}: checksum does not match sidecar")
    return loads(blob), meta


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")
