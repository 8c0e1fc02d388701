"""Versioned JSON checkpoints of named parameter tensors.

float64 values are serialized through repr, which round-trips bit-exactly
in Python. The ``kind`` field tells evaluation code how to interpret a
checkpoint (contrastive encoder, dual-latent model, single-latent model).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .errors import NotFoundError, ShapeError
from .util import write_text_atomic

FORMAT_VERSION = 1


def save_checkpoint(path, params: dict[str, Tensor], kind: str,
                    meta: dict | None = None) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "meta": meta or {},
        "params": {
            name: {"shape": list(p.data.shape), "data": p.data.reshape(-1).tolist()}
            for name, p in sorted(params.items())
        },
    }
    write_text_atomic(path, json.dumps(payload, sort_keys=True))


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], str, dict]:
    path = Path(path)
    if not path.exists():
        raise NotFoundError(f"checkpoint not found: {path}")
    payload = json.loads(path.read_text())
    if payload.get("format_version") != FORMAT_VERSION:
        raise ShapeError(f"unsupported checkpoint version in {path}")
    arrays = {}
    for name, rec in payload["params"].items():
        arr = np.asarray(rec["data"], dtype=np.float64).reshape(rec["shape"])
        arrays[name] = arr
    return arrays, payload["kind"], payload.get("meta", {})
