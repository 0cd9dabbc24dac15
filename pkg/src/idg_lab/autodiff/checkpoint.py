"""Flat little-endian float64 parameter files with a JSON shape manifest."""

import json
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel

from idg_lab.utils.error_handler import MissingArtifactError
from idg_lab.utils.output import write_json

DTYPE = np.dtype("<f8")


class CheckpointEntry(BaseModel):
    name: str
    shape: list[int]
    offset: int
    size: int


class CheckpointManifest(BaseModel):
    entries: list[CheckpointEntry]
    meta: dict[str, Any] = {}


def _paths(stem: Path) -> tuple[Path, Path]:
    return stem.with_suffix(".bin"), stem.with_suffix(".json")


def save_checkpoint(stem: Path, params: dict[str, np.ndarray], meta: dict[str, Any] | None = None) -> Path:
    """Write ``<stem>.bin`` and ``<stem>.json``; arrays are stored in dict order.

    Returns:
        Path of the manifest
    """
    bin_path, json_path = _paths(stem)
    bin_path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    with bin_path.open("wb") as f:
        for name, array in params.items():
            flat = np.ascontiguousarray(array, dtype=DTYPE).ravel()
            f.write(flat.tobytes())
            entries.append(
                CheckpointEntry(name=name, shape=list(np.shape(array)), offset=offset, size=flat.size)
            )
            offset += flat.size
    return write_json(json_path, CheckpointManifest(entries=entries, meta=meta or {}))


def load_checkpoint(stem: Path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    """Read a checkpoint written by :func:`save_checkpoint`.

    Raises:
        MissingArtifactError: If either file is absent
    """
    bin_path, json_path = _paths(stem)
    for path in (bin_path, json_path):
        if not path.exists():
            raise MissingArtifactError(f"Checkpoint file not found: {path}")
    manifest = CheckpointManifest.model_validate(json.loads(json_path.read_text(encoding="utf-8")))
    flat = np.frombuffer(bin_path.read_bytes(), dtype=DTYPE).astype(np.float64)
    params = {
        e.name: flat[e.offset : e.offset + e.size].reshape(e.shape).copy() for e in manifest.entries
    }
    return params, manifest.meta
