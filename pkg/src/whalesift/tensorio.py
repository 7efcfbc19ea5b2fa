"""Raw float32 tensor files with a JSON sidecar.

Layout: ``<name>.f32`` holds little-endian 32-bit floats, row-major;
``<name>.json`` holds ``{"shape": [...], "dtype": "float32", "local_id": ...}``.
Writes go through a temp file and rename so readers never see partial data.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .errors import WhalesiftError


class TensorIOError(WhalesiftError):
    """Tensor file missing, truncated, or inconsistent with its sidecar."""


def save_tensor(base: str | Path, array: np.ndarray, local_id: str) -> Path:
    """Write ``base.f32`` + ``base.json``; returns the .f32 path."""
    base = Path(base)
    base.parent.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(array, dtype="<f4")
    raw_path = base.with_suffix(".f32")
    meta_path = base.with_suffix(".json")

    tmp = raw_path.with_suffix(".f32.tmp")
    tmp.write_bytes(data.tobytes())
    os.replace(tmp, raw_path)

    meta = {"shape": list(data.shape), "dtype": "float32", "local_id": local_id}
    tmp = meta_path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(meta), encoding="utf-8")
    os.replace(tmp, meta_path)
    return raw_path


def load_tensor(base: str | Path) -> tuple[np.ndarray, dict]:
    """Read a tensor written by :func:`save_tensor`; returns (array, sidecar)."""
    base = Path(base)
    raw_path = base.with_suffix(".f32")
    meta_path = base.with_suffix(".json")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        raw = raw_path.read_bytes()
    except OSError as err:
        raise TensorIOError(f"cannot read tensor {base}: {err}") from err
    shape = tuple(int(s) for s in meta["shape"])
    expected = int(np.prod(shape)) * 4
    if len(raw) != expected:
        raise TensorIOError(
            f"tensor {raw_path} has {len(raw)} bytes, sidecar implies {expected}"
        )
    array = np.frombuffer(raw, dtype="<f4").reshape(shape)
    return array, meta
