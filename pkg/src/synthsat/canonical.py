"""Canonical structured-text serialization and content digests.

The canonical form is JSON restricted so that byte output is reproducible:
object keys sorted, no insignificant whitespace, UTF-8, and every float
rendered with exactly six fractional digits.  Digests of layouts, requests
and manifests are SHA-256 over this form.
"""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np


def _canon(value):
    if isinstance(value, dict):
        items = sorted(value.items(), key=lambda kv: kv[0])
        return "{" + ",".join(json.dumps(k) + ":" + _canon(v) for k, v in items) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_canon(v) for v in value) + "]"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            raise ValueError("non-finite float in canonical document")
        text = f"{value:.6f}"
        if text == "-0.000000":
            text = "0.000000"
        return text
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if value is None:
        return "null"
    raise TypeError(f"unsupported type in canonical document: {type(value).__name__}")


def canonical_json(value) -> str:
    return _canon(value)


def canonical_bytes(value) -> bytes:
    return _canon(value).encode("utf-8")


def digest_of(value) -> str:
    """SHA-256 hex digest of the canonical serialization."""
    return hashlib.sha256(canonical_bytes(value)).hexdigest()


def digest_of_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def image_digest(arr: np.ndarray) -> str:
    """Host-stable digest of raw pixel content (independent of PNG encoder)."""
    arr = np.ascontiguousarray(arr)
    header = f"{arr.shape}:{arr.dtype.str}:".encode("ascii")
    return hashlib.sha256(header + arr.tobytes()).hexdigest()
