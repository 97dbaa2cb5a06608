"""Detail reinsertion, procedural clouds, mood blending, sensor degradation.

Compositing is the standard over-operator evaluated in float64 with a
single round-half-up at the very end.  Cloud layers are thresholded
5-octave value noise; the threshold is solved by bisection on the realized
field so measured coverage lands on the level target.  Resolution
degradation is a normalized Gaussian PSF followed by exact area
resampling, so mean intensity is conserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig, InvalidGsd, ResolutionMismatch
from .noise import value_noise
from .seeds import derive_seed

COVERAGE_TARGETS = {"low": 0.10, "medium": 0.30, "high": 0.55, "extreme": 0.80}
COVERAGE_TOLERANCE = 0.03
CLOUD_ALPHA_SOFTNESS = 0.16

# per-channel multiplier and offset applied at blend weight 1
MOOD_TABLE = {
    "morning": ((1.08, 0.97, 0.82), (6.0, 2.0, 0.0)),
    "day": ((1.0, 1.0, 1.0), (0.0, 0.0, 0.0)),
    "evening": ((1.10, 0.88, 0.72), (8.0, 0.0, 0.0)),
    "night": ((0.25, 0.30, 0.45), (0.0, 2.0, 12.0)),
}

DEFAULT_STAGE_ORDER = ("details", "clouds", "mood", "degrade")


@dataclass(frozen=True)
class CloudLayer:
    rgb: np.ndarray  # uint8 white-gray
    alpha: np.ndarray  # float64 in [0,1]
    coverage_level: str
    measured_coverage: float
    seed: int


@dataclass(frozen=True)
class CompositeRecipe:
    base_rgb: np.ndarray  # synthesized image, uint8 HxWx3
    detail_layers: tuple = ()  # ordered (name, rgb uint8, alpha float64) from bottom
    clouds: CloudLayer | None = None
    mood_tag: str | None = None
    mood_weight: float = 0.0
    psf_sigma_px: float = 0.0
    native_gsd: float = 1.0
    target_gsd: float = 1.0
    stage_order: tuple = DEFAULT_STAGE_ORDER


def generate_clouds(level: str, seed: int, px: int) -> CloudLayer:
    """Cloud layer whose alpha>0.5 fraction hits the level's coverage target."""
    if level not in COVERAGE_TARGETS:
        raise InvalidConfig(f"cloud level must be one of {sorted(COVERAGE_TARGETS)}, got {level!r}")
    target = COVERAGE_TARGETS[level]
    fld = value_noise(px, derive_seed(seed, "clouds"), octaves=5, persistence=0.5)

    lo, hi = 0.0, 1.0
    for _ in range(50):
        mid = (lo + hi) / 2.0
        if float(np.mean(fld > mid)) > target:
            lo = mid
        else:
            hi = mid
    tau = (lo + hi) / 2.0

    alpha = np.clip(0.5 + (fld - tau) / CLOUD_ALPHA_SOFTNESS, 0.0, 1.0)
    measured = float(np.mean(alpha > 0.5))
    rgb = np.floor((0.86 + 0.12 * fld) * 255.0 + 0.5).astype(np.uint8)
    rgb = np.repeat(rgb[..., None], 3, axis=2)
    return CloudLayer(
        rgb=rgb, alpha=alpha, coverage_level=level, measured_coverage=measured, seed=int(seed)
    )


def _over(below: np.ndarray, rgb: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    a = alpha[..., None]
    return a * rgb.astype(np.float64) + (1.0 - a) * below


def _check_shape(base, arr, what):
    if arr.shape[:2] != base.shape[:2]:
        raise ResolutionMismatch(f"{what} is {arr.shape[:2]}, base is {base.shape[:2]}")


def _quantize(img: np.ndarray) -> np.ndarray:
    return np.floor(np.clip(img, 0.0, 255.0) + 0.5).astype(np.uint8)


def composite(recipe: CompositeRecipe) -> np.ndarray:
    """Apply the recipe stages in order; float throughout, one final rounding."""
    img = recipe.base_rgb.astype(np.float64)
    for stage in recipe.stage_order:
        if stage == "details":
            for name, rgb, alpha in recipe.detail_layers:
                _check_shape(recipe.base_rgb, rgb, f"detail layer {name!r}")
                _check_shape(recipe.base_rgb, alpha, f"detail alpha {name!r}")
                img = _over(img, rgb, alpha)
        elif stage == "clouds":
            if recipe.clouds is not None:
                _check_shape(recipe.base_rgb, recipe.clouds.alpha, "cloud layer")
                img = _over(img, recipe.clouds.rgb, recipe.clouds.alpha)
        elif stage == "mood":
            if recipe.mood_tag is not None and recipe.mood_weight > 0:
                img = _mood_float(img, recipe.mood_tag, recipe.mood_weight)
        elif stage == "degrade":
            if recipe.target_gsd > recipe.native_gsd or recipe.psf_sigma_px > 0:
                img = _degrade_float(
                    img, recipe.native_gsd, recipe.target_gsd, recipe.psf_sigma_px
                )
        else:
            raise InvalidConfig(f"unknown composite stage {stage!r}")
    return _quantize(img)


def _mood_float(img: np.ndarray, mood_tag: str, w: float) -> np.ndarray:
    if mood_tag not in MOOD_TABLE:
        raise InvalidConfig(f"mood tag must be one of {sorted(MOOD_TABLE)}, got {mood_tag!r}")
    if not (0.0 <= w <= 1.0):
        raise InvalidConfig(f"mood weight must be in [0,1], got {w}")
    mult, offset = MOOD_TABLE[mood_tag]
    graded = img * np.asarray(mult) + np.asarray(offset)
    return (1.0 - w) * img + w * graded


def mood_blend(image: np.ndarray, mood_tag: str, w: float) -> np.ndarray:
    """Blend toward the time-of-day color grade; w=0 is the identity."""
    return _quantize(_mood_float(image.astype(np.float64), mood_tag, w))


def _gaussian_1d(sigma: float) -> np.ndarray:
    radius = max(1, int(math.ceil(4.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _blur_axis(img: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = len(kernel) // 2
    pad = [(0, 0)] * img.ndim
    pad[axis] = (radius, radius)
    padded = np.pad(img, pad, mode="reflect")
    out = np.zeros_like(img)
    for i, k in enumerate(kernel):
        sl = [slice(None)] * img.ndim
        sl[axis] = slice(i, i + img.shape[axis])
        out += k * padded[tuple(sl)]
    return out


def _box_means_1d(img: np.ndarray, out_n: int, axis: int) -> np.ndarray:
    """Exact area means over [i*n/out, (i+1)*n/out) boxes along one axis."""
    img = np.moveaxis(img, axis, 0)
    n = img.shape[0]
    trailing = (1,) * (img.ndim - 1)
    cum = np.concatenate([np.zeros((1,) + img.shape[1:]), np.cumsum(img, axis=0)], axis=0)

    def integral_to(x):
        # integral of the piecewise-constant signal over [0, x)
        i = np.minimum(np.floor(x).astype(np.int64), n)
        frac = (x - i).reshape(x.shape + trailing)
        inside = (i < n).reshape(x.shape + trailing)
        return cum[i] + np.where(inside, frac * img[np.minimum(i, n - 1)], 0.0)

    edges = np.linspace(0.0, float(n), out_n + 1)
    integ = integral_to(edges)
    width = (edges[1:] - edges[:-1]).reshape((out_n,) + trailing)
    means = (integ[1:] - integ[:-1]) / width
    return np.moveaxis(means, 0, axis)


def degrade_resolution(image: np.ndarray, native_gsd: float, target_gsd: float,
                       psf_sigma_px: float) -> np.ndarray:
    """PSF blur + area downsample from native to target GSD (uint8 in/out)."""
    out = _degrade_float(image.astype(np.float64), native_gsd, target_gsd, psf_sigma_px)
    return _quantize(out)


def _degrade_float(img: np.ndarray, native_gsd: float, target_gsd: float,
                   psf_sigma_px: float) -> np.ndarray:
    if native_gsd <= 0 or target_gsd < native_gsd:
        raise InvalidGsd(f"need target_gsd >= native_gsd > 0, got {native_gsd} -> {target_gsd}")
    if psf_sigma_px < 0:
        raise InvalidGsd(f"psf_sigma_px must be >= 0, got {psf_sigma_px}")
    factor = target_gsd / native_gsd
    sigma = psf_sigma_px * factor
    if sigma > 0:
        k = _gaussian_1d(sigma)
        img = _blur_axis(img, k, 0)
        img = _blur_axis(img, k, 1)
    if factor > 1.0:
        out_h = max(1, int(math.floor(img.shape[0] / factor + 0.5)))
        out_w = max(1, int(math.floor(img.shape[1] / factor + 0.5)))
        if out_h != img.shape[0] or out_w != img.shape[1]:
            img = _box_means_1d(img, out_h, 0)
            img = _box_means_1d(img, out_w, 1)
    return img
