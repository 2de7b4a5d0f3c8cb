"""Artifact manifests and serialization helpers."""

from __future__ import annotations

import json
import os

import numpy as np

from . import __version__
from .groups import GroupSpec

__all__ = ["manifest", "write_json", "write_text"]


def manifest(spec: GroupSpec, seed: int, command: str, params: dict,
             ledger: dict | None = None) -> dict:
    """Provenance record stored next to every produced artifact."""
    return {
        "tool": "carnotkit",
        "version": __version__,
        "command": command,
        "group": spec.name,
        "group_hash": spec.config_hash(),
        "seed": seed,
        "params": params,
        "ledger": ledger,
    }


def _default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.bool_,)):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def write_json(path: str, payload: dict) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, default=_default)
        fh.write("\n")


def write_text(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)
