"""Checkpoint container: named float64 tensors plus free-form metadata.

The file is a single JSON object::

    {
      "format": "sentorder-checkpoint",
      "version": 1,
      "meta": {...},
      "tensors": {"<name>": {"shape": [r, c], "data": [row-major floats]}}
    }

Floats are written with Python's shortest round-trip repr, so a save/load
cycle reproduces every value bit for bit.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

FORMAT = "sentorder-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


def encode_tensors(tensors: dict[str, np.ndarray]) -> dict:
    return {
        name: {"shape": list(arr.shape), "data": np.asarray(arr, dtype=np.float64).ravel().tolist()}
        for name, arr in tensors.items()
    }


def decode_tensors(blob: dict) -> dict[str, np.ndarray]:
    out = {}
    for name, entry in blob.items():
        shape = tuple(entry["shape"])
        data = np.asarray(entry["data"], dtype=np.float64)
        if data.size != int(np.prod(shape, dtype=np.int64)):
            raise CheckpointError(f"tensor {name!r}: {data.size} values for shape {shape}")
        out[name] = data.reshape(shape)
    return out


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict | None = None) -> None:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "meta": meta or {},
        "tensors": encode_tensors(tensors),
    }
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"{path}: not a checkpoint ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise CheckpointError(f"{path}: not a {FORMAT} file")
    if doc.get("version") != VERSION:
        raise CheckpointError(f"{path}: unsupported version {doc.get('version')}")
    return decode_tensors(doc["tensors"]), doc.get("meta", {})
