"""Guidance-map extraction: canny edges, depth, sketch, color blocks.

All extractors are pure and deterministic.  The canny pipeline is pinned
bit-exactly: 5x5 Gaussian (sigma 1.4) built by sequential row-major
accumulation, 3x3 Sobel, arithmetic-only direction binning (no atan2),
non-maximum suppression keeping the first pixel of magnitude ties, double
threshold on magnitude rescaled to [0,255], hysteresis by 8-connectivity.
Convolutions use reflect padding; the one-pixel border is suppressed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidThresholds

GAUSS_SIZE = 5
GAUSS_SIGMA = 1.4
CANNY_LOW_DEFAULT = 50.0
CANNY_HIGH_DEFAULT = 150.0
SKETCH_DOWNSAMPLE = 4
COLOR_BLOCK_DEFAULT = 64

_TAN_22_5 = math.tan(math.radians(22.5))
_TAN_67_5 = math.tan(math.radians(67.5))

_SOBEL_X = ((-1.0, 0.0, 1.0), (-2.0, 0.0, 2.0), (-1.0, 0.0, 1.0))
_SOBEL_Y = ((-1.0, -2.0, -1.0), (0.0, 0.0, 0.0), (1.0, 2.0, 1.0))


@dataclass(frozen=True)
class ControlBundle:
    canny: np.ndarray
    depth8: np.ndarray
    sketch: np.ndarray
    color_blocks: np.ndarray
    source_tag: str  # "render" | "reference_photo"

    def resolution(self) -> tuple[int, int]:
        return self.canny.shape[0], self.canny.shape[1]


def luma(rgb: np.ndarray) -> np.ndarray:
    """Rec. 601 grayscale as float64 (identity for single-channel input)."""
    if rgb.ndim == 2:
        return rgb.astype(np.float64)
    r = rgb[..., 0].astype(np.float64)
    g = rgb[..., 1].astype(np.float64)
    b = rgb[..., 2].astype(np.float64)
    return 0.299 * r + 0.587 * g + 0.114 * b


def gaussian_kernel_5x5() -> np.ndarray:
    # built with sequential accumulation so the normalization divisor is
    # reproducible against the scalar reference
    k = np.empty((GAUSS_SIZE, GAUSS_SIZE), dtype=np.float64)
    half = GAUSS_SIZE // 2
    total = 0.0
    for i in range(GAUSS_SIZE):
        for j in range(GAUSS_SIZE):
            v = math.exp(-((i - half) ** 2 + (j - half) ** 2) / (2.0 * GAUSS_SIGMA**2))
            k[i, j] = v
            total += v
    return k / total


def _conv2_reflect(img: np.ndarray, kernel) -> np.ndarray:
    kh = len(kernel)
    kw = len(kernel[0])
    ph, pw = kh // 2, kw // 2
    padded = np.pad(img, ((ph, ph), (pw, pw)), mode="reflect")
    h, w = img.shape
    acc = np.zeros((h, w), dtype=np.float64)
    for di in range(kh):
        for dj in range(kw):
            acc += kernel[di][dj] * padded[di : di + h, dj : dj + w]
    return acc


def _dilate8(mask: np.ndarray) -> np.ndarray:
    padded = np.pad(mask, 1, mode="constant")
    out = np.zeros_like(mask)
    h, w = mask.shape
    for di in range(3):
        for dj in range(3):
            out |= padded[di : di + h, dj : dj + w]
    return out


def canny_edges(gray: np.ndarray, low: float = CANNY_LOW_DEFAULT, high: float = CANNY_HIGH_DEFAULT) -> np.ndarray:
    """Binary edge image ({0,255} uint8) from a grayscale image."""
    if not (0 <= low <= high):
        raise InvalidThresholds(f"need 0 <= low <= high, got low={low} high={high}")
    g = gray.astype(np.float64)
    blurred = _conv2_reflect(g, gaussian_kernel_5x5())
    gx = _conv2_reflect(blurred, _SOBEL_X)
    gy = _conv2_reflect(blurred, _SOBEL_Y)
    mag = np.sqrt(gx * gx + gy * gy)
    mmax = mag.max() if mag.size else 0.0
    scaled = mag * (255.0 / mmax) if mmax > 0 else np.zeros_like(mag)

    h, w = scaled.shape
    keep = np.zeros((h, w), dtype=bool)
    if h >= 3 and w >= 3:
        m = scaled[1:-1, 1:-1]
        ax = np.abs(gx[1:-1, 1:-1])
        ay = np.abs(gy[1:-1, 1:-1])
        sprod = gx[1:-1, 1:-1] * gy[1:-1, 1:-1]

        horiz = ay <= ax * _TAN_22_5
        vert = ay >= ax * _TAN_67_5
        diag_main = (~horiz) & (~vert) & (sprod > 0)
        diag_anti = (~horiz) & (~vert) & (sprod <= 0)

        back = np.where(
            horiz,
            scaled[1:-1, :-2],
            np.where(
                vert,
                scaled[:-2, 1:-1],
                np.where(diag_main, scaled[:-2, :-2], scaled[:-2, 2:]),
            ),
        )
        fwd = np.where(
            horiz,
            scaled[1:-1, 2:],
            np.where(
                vert,
                scaled[2:, 1:-1],
                np.where(diag_main, scaled[2:, 2:], scaled[2:, :-2]),
            ),
        )
        del diag_anti
        keep[1:-1, 1:-1] = (m > back) & (m >= fwd)

    nms = np.where(keep, scaled, 0.0)
    strong = nms >= high
    candidate = (nms >= low) & keep
    edges = strong.copy()
    while True:
        grown = _dilate8(edges) & candidate
        nxt = edges | grown
        if np.array_equal(nxt, edges):
            break
        edges = nxt
    return np.where(edges, 255, 0).astype(np.uint8)


def depth_to_control(depth: np.ndarray) -> np.ndarray:
    """8-bit guidance depth, near=255 far=0; constant frames map to 255."""
    d = depth.astype(np.float64)
    dmin = float(d.min())
    dmax = float(d.max())
    if dmax == dmin:
        return np.full(d.shape, 255, dtype=np.uint8)
    return np.floor(255.0 * (dmax - d) / (dmax - dmin) + 0.5).astype(np.uint8)


def sketch_map(rgb: np.ndarray) -> np.ndarray:
    """Coarse outline map: x4 block downsample, canny, dilate, nearest upsample."""
    g = luma(rgb)
    h, w = g.shape
    f = SKETCH_DOWNSAMPLE
    hs, ws = h // f, w // f
    if hs < 3 or ws < 3:
        return np.zeros((h, w), dtype=np.uint8)
    small = g[: hs * f, : ws * f].reshape(hs, f, ws, f).mean(axis=(1, 3))
    edges = canny_edges(small, CANNY_LOW_DEFAULT, CANNY_HIGH_DEFAULT)
    dil = _dilate8(edges > 0)
    up = np.kron(dil, np.ones((f, f), dtype=bool))
    out = np.zeros((h, w), dtype=np.uint8)
    out[: hs * f, : ws * f] = np.where(up, 255, 0)
    return out


def color_block_map(rgb: np.ndarray, block: int = COLOR_BLOCK_DEFAULT) -> np.ndarray:
    """Each BxB tile replaced by its mean color (round half-up); edge tiles truncated."""
    if block < 1:
        raise InvalidThresholds(f"block must be >= 1, got {block}")
    img = rgb.astype(np.float64)
    if img.ndim == 2:
        img = img[..., None]
    h, w, ch = img.shape
    out = np.empty((h, w, ch), dtype=np.uint8)
    for i0 in range(0, h, block):
        for j0 in range(0, w, block):
            tile = img[i0 : i0 + block, j0 : j0 + block]
            mean = tile.reshape(-1, ch).sum(axis=0) / (tile.shape[0] * tile.shape[1])
            out[i0 : i0 + block, j0 : j0 + block] = np.floor(mean + 0.5).astype(np.uint8)
    if rgb.ndim == 2:
        return out[..., 0]
    return out


def resize_nearest(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbor resize along the first two axes."""
    h, w = img.shape[0], img.shape[1]
    rows = np.minimum((np.arange(out_h) + 0.5) * h / out_h, h - 1).astype(np.int64)
    cols = np.minimum((np.arange(out_w) + 0.5) * w / out_w, w - 1).astype(np.int64)
    return img[rows][:, cols]


def extract_bundle(rgb: np.ndarray, depth: np.ndarray | None, source_tag: str = "render",
                   low: float = CANNY_LOW_DEFAULT, high: float = CANNY_HIGH_DEFAULT,
                   block: int = COLOR_BLOCK_DEFAULT) -> ControlBundle:
    """All four guidance maps from an RGB frame and (for renders) metric depth.

    Reference photographs carry no metric depth; their depth map is the
    defined constant-frame value (255 everywhere), and callers normally
    pick modality subsets that skip depth for photo-sourced bundles.
    """
    gray = luma(rgb)
    if depth is None:
        depth8 = np.full(gray.shape, 255, dtype=np.uint8)
    else:
        depth8 = depth_to_control(depth)
    return ControlBundle(
        canny=canny_edges(gray, low, high),
        depth8=depth8,
        sketch=sketch_map(rgb),
        color_blocks=color_block_map(rgb, block),
        source_tag=source_tag,
    )
