"""Seeded multi-octave value noise on a pixel grid."""

from __future__ import annotations

import numpy as np

from .seeds import rng_for


def _bilinear_lattice(px: int, cells: int, lattice: np.ndarray) -> np.ndarray:
    # sample a (cells+1)^2 lattice at pixel centers
    x = (np.arange(px) + 0.5) / px * cells
    i0 = np.minimum(x.astype(np.int64), cells - 1)
    f = x - i0
    r0, rf = i0[:, None], f[:, None]
    c0, cf = i0[None, :], f[None, :]
    v00 = lattice[r0, c0]
    v01 = lattice[r0, c0 + 1]
    v10 = lattice[r0 + 1, c0]
    v11 = lattice[r0 + 1, c0 + 1]
    top = v00 * (1 - cf) + v01 * cf
    bot = v10 * (1 - cf) + v11 * cf
    return top * (1 - rf) + bot * rf


def value_noise(px: int, seed: int, octaves: int = 5, persistence: float = 0.5,
                base_cells: int = 4) -> np.ndarray:
    """Normalized [0,1] field of `octaves` bilinear lattices, deterministic in seed."""
    field = np.zeros((px, px), dtype=np.float64)
    for o in range(octaves):
        cells = base_cells * (2**o)
        lattice = rng_for(seed, "octave", o).random((cells + 1, cells + 1))
        field += (persistence**o) * _bilinear_lattice(px, cells, lattice)
    lo, hi = field.min(), field.max()
    if hi > lo:
        field = (field - lo) / (hi - lo)
    else:
        field = np.zeros_like(field)
    return field
