"""Binary 2-D float32 tensor files.

Layout: 44-byte header (b"HSVC", u32 version=1, u32 rows, u32 cols, zero
padding) followed by rows*cols little-endian float32 values, row-major.
"""
from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"HSVC"
VERSION = 1
HEADER_SIZE = 44
_HEADER = struct.Struct("<4sIII")


class TensorFileError(ValueError):
    pass


class BadMagicError(TensorFileError):
    pass


class TruncatedPayloadError(TensorFileError):
    pass


def encode(matrix) -> bytes:
    m = np.asarray(matrix, dtype="<f4")
    if m.ndim != 2:
        raise TensorFileError(f"expected a 2-D matrix, got shape {m.shape}")
    header = _HEADER.pack(MAGIC, VERSION, m.shape[0], m.shape[1]).ljust(HEADER_SIZE, b"\0")
    return header + np.ascontiguousarray(m).tobytes()


def decode(blob: bytes, name: str = "<bytes>") -> np.ndarray:
    if len(blob) < HEADER_SIZE:
        raise TruncatedPayloadError(f"{name}: header truncated ({len(blob)} bytes)")
    magic, version, rows, cols = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagicError(f"{name}: bad magic {magic!r}")
    if version != VERSION:
        raise TensorFileError(f"{name}: unsupported version {version}")
    expected = HEADER_SIZE + rows * cols * 4
    if len(blob) < expected:
        raise TruncatedPayloadError(f"{name}: payload has {len(blob) - HEADER_SIZE} bytes, "
                                    f"header promises {rows * cols * 4}")
    if len(blob) > expected:
        raise TensorFileError(f"{name}: {len(blob) - expected} trailing bytes")
    return np.frombuffer(blob, dtype="<f4", offset=HEADER_SIZE).reshape(rows, cols).astype(np.float32)


def atomic_write_bytes(path, blob: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_matrix(path, matrix) -> None:
    atomic_write_bytes(path, encode(matrix))


def load_matrix(path) -> np.ndarray:
    path = Path(path)
    return decode(path.read_bytes(), str(path))
