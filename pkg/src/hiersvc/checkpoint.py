"""Versioned checkpoint container.

A checkpoint is an uncompressed zip archive holding ``meta.json`` and one
tensor file per entry (``tensors/<path>.bin``) in the HSVC binary tensor
format. N-d tensors are stored as (shape[0], prod(shape[1:])) matrices and
their true shapes are recorded in the metadata. Archive timestamps are fixed
so identical contents give identical bytes.
"""
from __future__ import annotations

import io
import json
import math
import zipfile
from pathlib import Path
from typing import Mapping

import numpy as np

from . import tensor_file

FORMAT = "hiersvc-checkpoint"
FORMAT_VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)


class CheckpointError(ValueError):
    pass


def _as_matrix(array: np.ndarray) -> np.ndarray:
    if array.ndim == 0:
        return array.reshape(1, 1)
    return array.reshape(array.shape[0], math.prod(array.shape[1:]))


def _entry(name: str) -> zipfile.ZipInfo:
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o644 << 16
    return info


def save(path, tensors: Mapping[str, np.ndarray], meta: Mapping) -> None:
    shapes = {}
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        for name in sorted(tensors):
            arr = np.asarray(tensors[name])
            if arr.dtype != np.float32:
                raise CheckpointError(f"{name}: checkpoint tensors must be float32, got {arr.dtype}")
            shapes[name] = list(arr.shape)
            zf.writestr(_entry(f"tensors/{name}.bin"), tensor_file.encode(_as_matrix(arr)))
        header = {"format": FORMAT, "version": FORMAT_VERSION, "shapes": shapes, "meta": dict(meta)}
        zf.writestr(_entry("meta.json"), json.dumps(header, sort_keys=True, indent=1))
    tensor_file.atomic_write_bytes(path, buf.getvalue())


def load(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    try:
        with zipfile.ZipFile(path) as zf:
            header = json.loads(zf.read("meta.json"))
            if header.get("format") != FORMAT:
                raise CheckpointError(f"{path}: not a checkpoint file")
            if header.get("version") != FORMAT_VERSION:
                raise CheckpointError(f"{path}: unsupported checkpoint version {header.get('version')}")
            tensors = {}
            for name, shape in header["shapes"].items():
                m = tensor_file.decode(zf.read(f"tensors/{name}.bin"), f"{path}:{name}")
                if m.size != math.prod(shape):
                    raise CheckpointError(f"{path}: {name} has {m.size} values, expected shape {shape}")
                tensors[name] = m.reshape(shape)
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError, tensor_file.TensorFileError) as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from exc
    return tensors, header["meta"]
