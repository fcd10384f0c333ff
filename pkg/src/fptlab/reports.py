"""Deterministic JSON rendering and the common report envelope."""

from __future__ import annotations

import json
import os

import numpy as np

from . import __version__

SCHEMA_VERSION = 1


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, fixed indentation, no NaN/Inf."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False, default=_plain) + "\n"


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def envelope(command: str, config: dict, result, duration: float | None = None) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "seed": config.get("seed", 0),
        "version": __version__,
        "result": result,
    }
    if duration is not None:
        out["duration_s"] = duration
    return out


def thread_count() -> int:
    """Worker cap from ``FPT_LAB_THREADS`` (default 1)."""
    raw = os.environ.get("FPT_LAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
