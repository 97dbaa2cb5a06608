"""PNG / float-TIFF encoding and file helpers (Pillow-backed)."""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image

from .errors import ProtocolError


def png_encode(arr: np.ndarray) -> bytes:
    if arr.dtype != np.uint8:
        raise ValueError(f"png_encode expects uint8, got {arr.dtype}")
    if arr.ndim == 2:
        img = Image.fromarray(arr, mode="L")
    elif arr.ndim == 3 and arr.shape[2] == 3:
        img = Image.fromarray(arr, mode="RGB")
    else:
        raise ValueError(f"unsupported image shape {arr.shape}")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def png_decode(data: bytes) -> np.ndarray:
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise ProtocolError(f"invalid PNG payload: {exc}") from exc
    if img.mode not in ("L", "RGB"):
        img = img.convert("RGB")
    return np.asarray(img)


def png_b64_encode(arr: np.ndarray) -> str:
    return base64.b64encode(png_encode(arr)).decode("ascii")


def png_b64_decode(text: str) -> np.ndarray:
    try:
        raw = base64.b64decode(text, validate=True)
    except Exception as exc:
        raise ProtocolError(f"invalid base64 image: {exc}") from exc
    return png_decode(raw)


def save_png(path, arr: np.ndarray) -> bytes:
    data = png_encode(arr)
    with open(path, "wb") as fh:
        fh.write(data)
    return data


def load_png(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return png_decode(fh.read())


def save_depth_tiff(path, depth: np.ndarray) -> None:
    """Metric depth as a 32-bit float TIFF."""
    Image.fromarray(depth.astype(np.float32), mode="F").save(path, format="TIFF")


def load_depth_tiff(path) -> np.ndarray:
    img = Image.open(path)
    img.load()
    return np.asarray(img, dtype=np.float32)
