"""Manifest assembly: the reproducible record of every generated product.

The manifest digest is computed over a stable projection that drops
wall-clock fields (latency_ms), so identical mock-backend runs yield
identical digests while still recording observed latencies.
"""

from __future__ import annotations

import json

from .canonical import digest_of

VOLATILE_KEYS = {"latency_ms", "reused", "run"}


def stable_projection(doc):
    if isinstance(doc, dict):
        return {k: stable_projection(v) for k, v in doc.items() if k not in VOLATILE_KEYS}
    if isinstance(doc, list):
        return [stable_projection(v) for v in doc]
    return doc


def manifest_digest(doc: dict) -> str:
    body = {k: v for k, v in doc.items() if k != "manifest_digest"}
    return digest_of(stable_projection(body))


def finalize_manifest(doc: dict) -> dict:
    doc = dict(doc)
    doc["manifest_digest"] = manifest_digest(doc)
    return doc


def write_manifest(path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
