"""Model checkpoints: JSON manifest + concatenated f32le parameter payloads."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .. import containers
from .layers import spec_from_dict, spec_to_dict


def save_checkpoint(path: str | Path, *, kind: str, specs: list, params: list,
                    meta: dict | None = None, extra_state: list | None = None) -> None:
    """Persist layer specs plus every parameter (and optional state) array.

    `params` may hold Tensors or numpy arrays; arrays are flattened in order
    and the manifest records each shape so loading is unambiguous.
    """
    arrays = [np.asarray(getattr(p, "data", p), dtype=np.float32) for p in params]
    state = [np.asarray(s, dtype=np.float32) for s in (extra_state or [])]
    header = {
        "kind": "checkpoint",
        "model": kind,
        "layers": [spec_to_dict(s) for s in specs],
        "param_shapes": [list(a.shape) for a in arrays],
        "state_shapes": [list(a.shape) for a in state],
        "meta": meta or {},
        "dtype": "f32le",
    }
    payload = np.concatenate([a.ravel() for a in arrays + state]) if arrays + state \
        else np.zeros(0, dtype=np.float32)
    containers.write_container(path, header, payload)


def load_checkpoint(path: str | Path):
    """Read a checkpoint, returning (model kind, specs, param arrays, state arrays, meta)."""
    header, payload = containers.read_container(path)
    if header.get("kind") != "checkpoint":
        raise containers.ContainerError(f"{path}: not a checkpoint container")
    specs = [spec_from_dict(d) for d in header["layers"]]
    arrays, offset = [], 0
    for shape in header["param_shapes"]:
        n = int(np.prod(shape)) if shape else 1
        arrays.append(payload[offset: offset + n].reshape(shape).astype(np.float32))
        offset += n
    state = []
    for shape in header["state_shapes"]:
        n = int(np.prod(shape)) if shape else 1
        state.append(payload[offset: offset + n].reshape(shape).astype(np.float32))
        offset += n
    if offset != payload.size:
        raise containers.ContainerError(f"{path}: payload size does not match manifest")
    return header.get("model", ""), specs, arrays, state, header.get("meta", {})
