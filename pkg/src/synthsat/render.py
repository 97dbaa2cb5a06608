"""Deterministic CPU raycaster over analytic primitives.

Geometry per structure kind: per-cell boxes for buildings, cylinder + dome
for reactors, open truncated cone for cooling towers, thin cylinder for
stacks; the ground plane z=0 always exists and is instance 0.  Cars are
small oriented boxes, steam sources become 3-7 seeded semi-transparent
ellipsoid billboards drifting in a per-seed direction.  Rays are pinhole
per-pixel nearest hits; shading is Lambertian from the sun plus ambient
(ambient only when the sun is below the horizon).  Everything is pure and
bit-reproducible for identical inputs, independent of the band worker
count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePose, InvalidParams, UnknownLayer
from .geometry import CameraPose, SunState
from .scene import FacilityLayout, StructureType
from .seeds import rng_for

GROUND_ALBEDO = (0.30, 0.33, 0.28)
REACTOR_ALBEDO = (0.75, 0.75, 0.75)
DOME_ALBEDO = (0.80, 0.80, 0.80)
TOWER_ALBEDO = (0.78, 0.78, 0.80)
STACK_ALBEDO = (0.58, 0.52, 0.52)
BUILDING_ALBEDO = (0.62, 0.62, 0.64)
STEAM_GRAY = (0.92, 0.92, 0.92)

CAR_PALETTE = (
    (0.90, 0.90, 0.90),
    (0.08, 0.08, 0.08),
    (0.70, 0.72, 0.75),
    (0.75, 0.10, 0.10),
    (0.12, 0.20, 0.60),
    (0.30, 0.30, 0.32),
    (0.10, 0.40, 0.15),
    (0.75, 0.65, 0.45),
)
CAR_LENGTH_M = 4.6
CAR_WIDTH_M = 1.9
CAR_HEIGHT_M = 1.5

DETAIL_LAYERS = ("cars", "steam", "clouds")

_INF = np.inf


@dataclass(frozen=True)
class Box:
    cx: float
    cy: float
    z0: float
    z1: float
    hx: float
    hy: float
    heading: float
    albedo: tuple[float, float, float]
    instance_id: int


@dataclass(frozen=True)
class Cylinder:
    cx: float
    cy: float
    z0: float
    z1: float
    radius: float
    albedo: tuple[float, float, float]
    instance_id: int


@dataclass(frozen=True)
class Dome:
    cx: float
    cy: float
    cz: float
    radius: float
    albedo: tuple[float, float, float]
    instance_id: int


@dataclass(frozen=True)
class Frustum:
    cx: float
    cy: float
    z0: float
    z1: float
    r0: float
    r1: float
    albedo: tuple[float, float, float]
    instance_id: int


@dataclass(frozen=True)
class Ellipsoid:
    cx: float
    cy: float
    cz: float
    rx: float
    ry: float
    rz: float
    opacity: float
    instance_id: int


@dataclass(frozen=True)
class SceneGeometry:
    structural: tuple
    details: dict = field(default_factory=dict)
    ground_albedo: tuple[float, float, float] = GROUND_ALBEDO


@dataclass(frozen=True)
class RenderOutput:
    rgb: np.ndarray  # HxWx3 uint8
    depth: np.ndarray  # HxW float64 meters (camera to hit)
    instance_mask: np.ndarray  # HxW int32, 0 = background
    detail_layers: dict  # name -> (rgb uint8, alpha float64)


def build_geometry(layout: FacilityLayout) -> SceneGeometry:
    """Analytic primitive groups for every placed structure and detail."""
    cell = layout.grid.cell_size
    structural = []
    for s in layout.structures:
        if s.kind is StructureType.BUILDING:
            for r, c in sorted(s.footprint_cells):
                ox, oy = layout.grid.cell_origin(r, c)
                structural.append(
                    Box(
                        cx=ox + cell / 2.0,
                        cy=oy + cell / 2.0,
                        z0=0.0,
                        z1=s.height,
                        hx=cell / 2.0,
                        hy=cell / 2.0,
                        heading=0.0,
                        albedo=BUILDING_ALBEDO,
                        instance_id=s.instance_id,
                    )
                )
            continue
        ox, oy = layout.grid.cell_origin(*s.anchor_cell)
        cx, cy = ox + cell / 2.0, oy + cell / 2.0
        if s.kind is StructureType.REACTOR:
            r = 0.38 * cell
            structural.append(
                Cylinder(cx=cx, cy=cy, z0=0.0, z1=s.height - r, radius=r,
                         albedo=REACTOR_ALBEDO, instance_id=s.instance_id)
            )
            structural.append(
                Dome(cx=cx, cy=cy, cz=s.height - r, radius=r,
                     albedo=DOME_ALBEDO, instance_id=s.instance_id)
            )
        elif s.kind is StructureType.COOLING_TOWER:
            structural.append(
                Frustum(cx=cx, cy=cy, z0=0.0, z1=s.height,
                        r0=0.45 * cell, r1=0.30 * cell,
                        albedo=TOWER_ALBEDO, instance_id=s.instance_id)
            )
        elif s.kind is StructureType.STACK:
            structural.append(
                Cylinder(cx=cx, cy=cy, z0=0.0, z1=s.height, radius=0.08 * cell,
                         albedo=STACK_ALBEDO, instance_id=s.instance_id)
            )

    cars = []
    for car in layout.details.cars:
        cars.append(
            Box(
                cx=car.x, cy=car.y, z0=0.0, z1=CAR_HEIGHT_M,
                hx=CAR_LENGTH_M / 2.0, hy=CAR_WIDTH_M / 2.0,
                heading=car.heading,
                albedo=CAR_PALETTE[car.color_index % len(CAR_PALETTE)],
                instance_id=0,
            )
        )

    steam = []
    tower_pos = {
        s.instance_id: s for s in layout.structures if s.kind is StructureType.COOLING_TOWER
    }
    for src in layout.details.steam_sources:
        tower = tower_pos.get(src.tower_instance_id)
        if tower is None or src.intensity <= 0:
            continue
        ox, oy = layout.grid.cell_origin(*tower.anchor_cell)
        cx, cy = ox + cell / 2.0, oy + cell / 2.0
        rng = rng_for(layout.seed, "steam_geom", tower.instance_id)
        n = int(rng.integers(3, 8))
        drift = rng.uniform(0.0, 2.0 * math.pi)
        dx, dy = math.cos(drift), math.sin(drift)
        for k in range(n):
            jx, jy = rng.uniform(-2.0, 2.0, size=2)
            steam.append(
                Ellipsoid(
                    cx=cx + dx * 6.0 * k + jx,
                    cy=cy + dy * 6.0 * k + jy,
                    cz=tower.height + 4.0 + 4.0 * k,
                    rx=6.0 + 2.2 * k,
                    ry=6.0 + 2.2 * k,
                    rz=3.0 + 1.1 * k,
                    opacity=0.45 * src.intensity,
                    instance_id=tower.instance_id,
                )
            )

    return SceneGeometry(
        structural=tuple(structural), details={"cars": tuple(cars), "steam": tuple(steam), "clouds": ()}
    )


def _camera_basis(pose: CameraPose):
    look = np.asarray(pose.look_dir, dtype=np.float64)
    up = np.asarray(pose.up_dir, dtype=np.float64)
    right = np.cross(look, up)
    norm = np.linalg.norm(right)
    if norm < 1e-9:
        raise DegeneratePose("look_dir parallel to up_dir")
    right /= norm
    cam_up = np.cross(right, look)
    return look, right, cam_up


def _ray_dirs(pose: CameraPose, image_px: int, row0: int, row1: int) -> np.ndarray:
    look, right, up = _camera_basis(pose)
    t = math.tan(math.radians(pose.fov_deg) / 2.0)
    js = (np.arange(image_px) + 0.5) / image_px * 2.0 - 1.0
    is_ = 1.0 - (np.arange(row0, row1) + 0.5) / image_px * 2.0
    u = js[None, :, None]
    v = is_[:, None, None]
    d = look[None, None, :] + t * (u * right[None, None, :] + v * up[None, None, :])
    d /= np.linalg.norm(d, axis=2, keepdims=True)
    return d


def _hit_box(o, d, box: Box):
    """Slab test in the box frame; returns (t, normal) with inf for misses."""
    ox = o[0] - box.cx
    oy = o[1] - box.cy
    ch, sh = math.cos(-box.heading), math.sin(-box.heading)
    lox = ox * ch - oy * sh
    loy = ox * sh + oy * ch
    ldx = d[..., 0] * ch - d[..., 1] * sh
    ldy = d[..., 0] * sh + d[..., 1] * ch
    oz, dz = o[2], d[..., 2]

    with np.errstate(divide="ignore", invalid="ignore"):
        tx1 = (-box.hx - lox) / ldx
        tx2 = (box.hx - lox) / ldx
        ty1 = (-box.hy - loy) / ldy
        ty2 = (box.hy - loy) / ldy
        tz1 = (box.z0 - oz) / dz
        tz2 = (box.z1 - oz) / dz
    txm, txM = np.minimum(tx1, tx2), np.maximum(tx1, tx2)
    tym, tyM = np.minimum(ty1, ty2), np.maximum(ty1, ty2)
    tzm, tzM = np.minimum(tz1, tz2), np.maximum(tz1, tz2)
    tmin = np.maximum(np.maximum(txm, tym), tzm)
    tmax = np.minimum(np.minimum(txM, tyM), tzM)
    hit = (tmax >= tmin) & (tmin > 1e-9)
    t = np.where(hit, tmin, _INF)

    # entering axis decides the normal; fixed x,y,z priority on exact corners
    nx = np.where(tmin == txm, np.where(ldx > 0, -1.0, 1.0), 0.0)
    ny = np.where((tmin == tym) & (nx == 0), np.where(ldy > 0, -1.0, 1.0), 0.0)
    nz = np.where((tmin == tzm) & (nx == 0) & (ny == 0), np.where(dz > 0, -1.0, 1.0), 0.0)
    chb, shb = math.cos(box.heading), math.sin(box.heading)
    wx = nx * chb - ny * shb
    wy = nx * shb + ny * chb
    normal = np.stack([wx, wy, nz], axis=-1)
    return t, normal


def _hit_cylinder(o, d, cyl: Cylinder):
    ox, oy, oz = o[0] - cyl.cx, o[1] - cyl.cy, o[2]
    dx, dy, dz = d[..., 0], d[..., 1], d[..., 2]
    a = dx * dx + dy * dy
    b = 2.0 * (ox * dx + oy * dy)
    c = ox * ox + oy * oy - cyl.radius * cyl.radius
    disc = b * b - 4.0 * a * c
    with np.errstate(divide="ignore", invalid="ignore"):
        sq = np.sqrt(np.maximum(disc, 0.0))
        t1 = (-b - sq) / (2.0 * a)
        t2 = (-b + sq) / (2.0 * a)
    t_side = np.full(dx.shape, _INF)
    for tc in (t1, t2):
        z = oz + tc * dz
        ok = (disc >= 0) & (a > 0) & (tc > 1e-9) & (z >= cyl.z0) & (z <= cyl.z1)
        t_side = np.where(ok & (tc < t_side), tc, t_side)

    with np.errstate(divide="ignore", invalid="ignore"):
        t_cap = (cyl.z1 - oz) / dz
    px = ox + t_cap * dx
    py = oy + t_cap * dy
    cap_ok = (t_cap > 1e-9) & (px * px + py * py <= cyl.radius * cyl.radius)
    t_cap = np.where(cap_ok, t_cap, _INF)

    t = np.minimum(t_side, t_cap)
    hx = ox + t_side * dx
    hy = oy + t_side * dy
    side_n = np.stack(
        [hx / cyl.radius, hy / cyl.radius, np.zeros_like(hx)], axis=-1
    )
    cap_n = np.zeros(side_n.shape)
    cap_n[..., 2] = 1.0
    normal = np.where((t_cap < t_side)[..., None], cap_n, side_n)
    return t, normal


def _hit_dome(o, d, dome: Dome):
    ox, oy, oz = o[0] - dome.cx, o[1] - dome.cy, o[2] - dome.cz
    dx, dy, dz = d[..., 0], d[..., 1], d[..., 2]
    b = 2.0 * (ox * dx + oy * dy + oz * dz)
    c = ox * ox + oy * oy + oz * oz - dome.radius * dome.radius
    disc = b * b - 4.0 * c
    sq = np.sqrt(np.maximum(disc, 0.0))
    t = np.full(dx.shape, _INF)
    for tc in ((-b - sq) / 2.0, (-b + sq) / 2.0):
        z = oz + tc * dz
        ok = (disc >= 0) & (tc > 1e-9) & (z >= 0.0)
        t = np.where(ok & (tc < t), tc, t)
    n = np.stack(
        [(ox + t * dx) / dome.radius, (oy + t * dy) / dome.radius, (oz + t * dz) / dome.radius],
        axis=-1,
    )
    return t, n


def _hit_frustum(o, d, fr: Frustum):
    """Double-sided truncated-cone shell (open top), so the inner wall shows."""
    k = (fr.r1 - fr.r0) / (fr.z1 - fr.z0)
    ox, oy = o[0] - fr.cx, o[1] - fr.cy
    dx, dy, dz = d[..., 0], d[..., 1], d[..., 2]
    e = fr.r0 + k * (o[2] - fr.z0)
    f = k * dz
    a = dx * dx + dy * dy - f * f
    b = 2.0 * (ox * dx + oy * dy - e * f)
    c = ox * ox + oy * oy - e * e
    disc = b * b - 4.0 * a * c
    with np.errstate(divide="ignore", invalid="ignore"):
        sq = np.sqrt(np.maximum(disc, 0.0))
        t1 = (-b - sq) / (2.0 * a)
        t2 = (-b + sq) / (2.0 * a)
        t_lin = -c / b  # a ~ 0: ray parallel to the cone surface slope
    t = np.full(dx.shape, _INF)
    lin = np.abs(a) < 1e-12
    for tc in (t1, t2):
        z = o[2] + tc * dz
        ok = (~lin) & (disc >= 0) & (tc > 1e-9) & (z >= fr.z0) & (z <= fr.z1)
        t = np.where(ok & (tc < t), tc, t)
    zl = o[2] + t_lin * dz
    okl = lin & (t_lin > 1e-9) & (zl >= fr.z0) & (zl <= fr.z1)
    t = np.where(okl & (t_lin < t), t_lin, t)

    hx = ox + t * dx
    hy = oy + t * dy
    hz = o[2] + t * dz
    rz = fr.r0 + k * (hz - fr.z0)
    n = np.stack([hx, hy, -k * rz], axis=-1)
    norm = np.linalg.norm(n, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        n = np.where(norm > 0, n / norm, n)
    # flip so the normal faces the incoming ray (double-sided shading)
    facing = np.sum(n * d, axis=-1, keepdims=True)
    n = np.where(facing > 0, -n, n)
    return t, n


def _hit_ellipsoid(o, d, el: Ellipsoid):
    ox, oy, oz = (o[0] - el.cx) / el.rx, (o[1] - el.cy) / el.ry, (o[2] - el.cz) / el.rz
    dx = d[..., 0] / el.rx
    dy = d[..., 1] / el.ry
    dz = d[..., 2] / el.rz
    a = dx * dx + dy * dy + dz * dz
    b = 2.0 * (ox * dx + oy * dy + oz * dz)
    c = ox * ox + oy * oy + oz * oz - 1.0
    disc = b * b - 4.0 * a * c
    sq = np.sqrt(np.maximum(disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (-b - sq) / (2.0 * a)
        t2 = (-b + sq) / (2.0 * a)
    t = np.where((disc >= 0) & (t1 > 1e-9), t1, np.where((disc >= 0) & (t2 > 1e-9), t2, _INF))
    nx = (ox + t * dx) / el.rx
    ny = (oy + t * dy) / el.ry
    nz = (oz + t * dz) / el.rz
    n = np.stack([nx, ny, nz], axis=-1)
    norm = np.linalg.norm(n, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        n = np.where(norm > 0, n / norm, n)
    return t, n


def _hit_primitive(o, d, prim):
    if isinstance(prim, Box):
        return _hit_box(o, d, prim)
    if isinstance(prim, Cylinder):
        return _hit_cylinder(o, d, prim)
    if isinstance(prim, Dome):
        return _hit_dome(o, d, prim)
    if isinstance(prim, Frustum):
        return _hit_frustum(o, d, prim)
    if isinstance(prim, Ellipsoid):
        return _hit_ellipsoid(o, d, prim)
    raise TypeError(f"unknown primitive {type(prim).__name__}")


def _ground_t(o, d):
    dz = d[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -o[2] / dz
    return np.where((dz < 0) & (t > 0), t, _INF)


def _shade(albedo, normal, sun: SunState):
    s = np.asarray(sun.direction())
    lam = np.maximum(np.sum(normal * s[None, None, :], axis=-1), 0.0)
    if sun.elevation_deg < 0:
        lam = np.zeros_like(lam)
    shade = sun.ambient + (1.0 - sun.ambient) * lam
    return albedo * shade[..., None]


def _nearest_structural(o, d, geom: SceneGeometry):
    shape = d.shape[:-1]
    best_t = _ground_t(o, d)
    ground_t = best_t.copy()
    best_id = np.zeros(shape, dtype=np.int32)
    best_n = np.zeros(shape + (3,))
    best_n[..., 2] = 1.0
    best_albedo = np.broadcast_to(np.asarray(geom.ground_albedo), shape + (3,)).copy()
    for prim in geom.structural:
        t, n = _hit_primitive(o, d, prim)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        best_id = np.where(closer, prim.instance_id, best_id)
        best_n = np.where(closer[..., None], n, best_n)
        best_albedo = np.where(closer[..., None], np.asarray(prim.albedo), best_albedo)
    return best_t, best_id, best_n, best_albedo, ground_t


def _occluded(points, sun: SunState, geom: SceneGeometry):
    """Hard shadow test: does anything block the ray from each point to the sun?"""
    s = np.asarray(sun.direction())
    d = np.broadcast_to(s, points.shape).copy()
    shape = points.shape[:-1]
    blocked = np.zeros(shape, dtype=bool)
    start = points + 1e-3 * d
    # hit functions only index the origin by axis, so per-ray origins pass
    # through as a tuple of coordinate arrays
    o = (start[..., 0], start[..., 1], start[..., 2])
    for prim in geom.structural:
        t, _ = _hit_primitive(o, d, prim)
        blocked |= np.isfinite(t)
    return blocked


def _render_band(geom, pose, sun, image_px, row0, row1, with_shadows):
    o = np.asarray(pose.position, dtype=np.float64)
    d = _ray_dirs(pose, image_px, row0, row1)
    t, ids, n, albedo, ground_t = _nearest_structural(o, d, geom)
    rgb = _shade(albedo, n, sun)
    if with_shadows and sun.elevation_deg >= 0:
        pts = o[None, None, :] + t[..., None] * d
        shadowed = _occluded(pts, sun, geom)
        rgb = np.where(shadowed[..., None], albedo * sun.ambient, rgb)

    layers = {}
    for name in ("cars", "steam"):
        layers[name] = _detail_band(geom, o, d, sun, name, structural_t=t)

    # reinsertable details also appear in the main render, composited in
    # front of structure hits they occlude
    for name in ("cars", "steam"):
        lrgb, alpha, lt = layers[name]
        vis = (alpha > 0) & (lt <= t)
        a = np.where(vis, alpha, 0.0)[..., None]
        rgb = a * lrgb + (1.0 - a) * rgb
    return t, ids, rgb, {k: (v[0], v[1]) for k, v in layers.items()}


def _detail_band(geom, o, d, sun, layer, structural_t=None):
    prims = geom.details.get(layer, ())
    shape = d.shape[:-1]
    if layer == "cars":
        best_t = np.full(shape, _INF)
        rgb = np.zeros(shape + (3,))
        for prim in prims:
            t, n = _hit_primitive(o, d, prim)
            closer = t < best_t
            best_t = np.where(closer, t, best_t)
            shaded = _shade(np.asarray(prim.albedo), n, sun)
            rgb = np.where(closer[..., None], shaded, rgb)
        alpha = np.isfinite(best_t).astype(np.float64)
        return rgb, alpha, best_t
    if layer == "steam":
        remain = np.ones(shape)
        best_t = np.full(shape, _INF)
        for prim in prims:
            t, _ = _hit_primitive(o, d, prim)
            hit = np.isfinite(t)
            remain = np.where(hit, remain * (1.0 - prim.opacity), remain)
            best_t = np.where(hit & (t < best_t), t, best_t)
        alpha = 1.0 - remain
        # flat plume lit as an upward-facing surface so night stays ambient
        lam = max(0.0, math.sin(math.radians(sun.elevation_deg))) if sun.elevation_deg >= 0 else 0.0
        lit = sun.ambient + (1.0 - sun.ambient) * lam
        rgb = np.broadcast_to(np.asarray(STEAM_GRAY) * lit, shape + (3,)).copy()
        return rgb, alpha, best_t
    if layer == "clouds":
        # clouds are composited post-synthesis; the engine layer is empty
        return (
            np.zeros(shape + (3,)),
            np.zeros(shape),
            np.full(shape, _INF),
        )
    raise UnknownLayer(f"layer must be one of {DETAIL_LAYERS}, got {layer!r}")


def _quantize(rgb_float) -> np.ndarray:
    return np.floor(np.clip(rgb_float, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def render(geom: SceneGeometry, pose: CameraPose, sun: SunState, image_px: int,
           workers: int = 1, with_shadows: bool = False) -> RenderOutput:
    """Raycast the scene into RGB, metric depth, and per-instance masks."""
    if image_px < 16:
        raise InvalidParams(f"image_px must be >= 16, got {image_px}")
    _camera_basis(pose)  # raises DegeneratePose early

    bands = _band_ranges(image_px, workers)
    if len(bands) == 1:
        results = [_render_band(geom, pose, sun, image_px, 0, image_px, with_shadows)]
    else:
        with ThreadPoolExecutor(max_workers=len(bands)) as pool:
            results = list(
                pool.map(
                    lambda b: _render_band(geom, pose, sun, image_px, b[0], b[1], with_shadows),
                    bands,
                )
            )

    depth = np.concatenate([r[0] for r in results], axis=0)
    mask = np.concatenate([r[1] for r in results], axis=0)
    rgb = _quantize(np.concatenate([r[2] for r in results], axis=0))
    layers = {}
    for name in ("cars", "steam"):
        lrgb = np.concatenate([r[3][name][0] for r in results], axis=0)
        alpha = np.concatenate([r[3][name][1] for r in results], axis=0)
        layers[name] = (_quantize(lrgb), alpha)
    return RenderOutput(rgb=rgb, depth=depth, instance_mask=mask, detail_layers=layers)


def render_detail_only(geom: SceneGeometry, pose: CameraPose, sun: SunState, image_px: int,
                       layer: str) -> tuple[np.ndarray, np.ndarray]:
    """(rgb, alpha) for a single reinsertable layer at the given pose."""
    if layer not in DETAIL_LAYERS:
        raise UnknownLayer(f"layer must be one of {DETAIL_LAYERS}, got {layer!r}")
    if image_px < 16:
        raise InvalidParams(f"image_px must be >= 16, got {image_px}")
    o = np.asarray(pose.position, dtype=np.float64)
    d = _ray_dirs(pose, image_px, 0, image_px)
    rgb, alpha, _ = _detail_band(SceneGeometry(structural=(), details=geom.details), o, d, sun, layer)
    return _quantize(rgb), alpha


def _band_ranges(image_px: int, workers: int):
    workers = max(1, min(int(workers), image_px))
    size = (image_px + workers - 1) // workers
    return [(i, min(i + size, image_px)) for i in range(0, image_px, size)]
