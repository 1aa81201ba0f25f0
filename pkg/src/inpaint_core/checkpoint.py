"""
Versioned binary checkpoint container.

Layout (little-endian):
    magic      8 bytes  b"INPCKPT1"
    version    uint32
    meta_len   uint32, followed by UTF-8 JSON metadata (sorted keys)
    count      uint32
    per tensor:
        name_len uint16, name UTF-8
        dtype    uint8   (0 = float32, 1 = float64, 2 = int64)
        ndim     uint8, dims uint32 x ndim
        payload  raw row-major values
"""
from __future__ import annotations

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np

from .errors import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"INPCKPT1"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<i8")}
_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1, np.dtype("int64"): 2}


def encode_checkpoint(tensors: Mapping[str, np.ndarray], metadata: Dict[str, Any]) -> bytes:
    meta = json.dumps(metadata, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", VERSION, len(meta)), meta, struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        code = _CODES.get(arr.dtype)
        if code is None:
            raise CheckpointError(f"unsupported dtype {arr.dtype} for tensor '{name}'")
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<BB", code, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())
    return b"".join(parts)


def decode_checkpoint(payload: bytes) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """Inverse of encode_checkpoint.

    Raises:
        CheckpointError: bad magic, unknown version or dtype, truncated payload
    """
    view = memoryview(payload)
    if bytes(view[:8]) != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    offset = 8

    def read(fmt: str):
        nonlocal offset
        size = struct.calcsize(fmt)
        if offset + size > len(view):
            raise CheckpointError("checkpoint truncated")
        values = struct.unpack_from(fmt, view, offset)
        offset += size
        return values

    version, meta_len = read("<II")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    if offset + meta_len > len(view):
        raise CheckpointError("checkpoint truncated in metadata")
    metadata = json.loads(bytes(view[offset:offset + meta_len]).decode("utf-8"))
    offset += meta_len
    (count,) = read("<I")
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = read("<H")
        name = bytes(view[offset:offset + name_len]).decode("utf-8")
        offset += name_len
        code, ndim = read("<BB")
        if code not in _DTYPES:
            raise CheckpointError(f"unknown dtype code {code} for '{name}'")
        shape = read(f"<{ndim}I") if ndim else ()
        dtype = _DTYPES[code]
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        if offset + nbytes > len(view):
            raise CheckpointError(f"checkpoint truncated in tensor '{name}'")
        tensors[name] = np.frombuffer(view[offset:offset + nbytes], dtype=dtype).reshape(shape).copy()
        offset += nbytes
    return tensors, metadata


def save_checkpoint(path: Union[str, Path], tensors: Mapping[str, np.ndarray], metadata: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(encode_checkpoint(tensors, metadata))
    tmp.replace(path)
    logger.info(f"[CKPT] Saved {len(tensors)} tensors to: {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    tensors, metadata = decode_checkpoint(path.read_bytes())
    logger.info(f"[CKPT] Loaded {len(tensors)} tensors from: {path}")
    return tensors, metadata
