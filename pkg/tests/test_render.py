import numpy as np
import pytest

from synthsat.errors import DegeneratePose, InvalidParams, UnknownLayer
from synthsat.geometry import AcquisitionParams, CameraPose, resolve_pose, sun_for_time
from synthsat.render import (
    Box,
    Cylinder,
    Dome,
    Frustum,
    SceneGeometry,
    build_geometry,
    render,
    render_detail_only,
    _ground_t,
    _ray_dirs,
)
from synthsat.scene import GridSpec, StructureType, add_activity, generate_layout
from synthsat.seeds import rng_for
from reference_raycast import trace_depth
from scene_fixtures import FIG2_COUNTS

DAY = sun_for_time("day")


def random_oracle_scene(seed):
    """Paired (renderer primitives, oracle descriptions, params): <=5 prims."""
    rng = rng_for(seed, "oracle_scene")
    prims, descs = [], []
    n = int(rng.integers(1, 6))
    for i in range(n):
        kind = ("box", "cylinder", "dome", "frustum")[int(rng.integers(4))]
        cx, cy = (float(v) for v in rng.uniform(-60, 60, 2))
        if kind == "box":
            hx, hy = (float(v) for v in rng.uniform(4, 25, 2))
            z1 = float(rng.uniform(5, 50))
            heading = float(rng.uniform(0, 6.28))
            prims.append(Box(cx, cy, 0.0, z1, hx, hy, heading, (0.5, 0.5, 0.5), i + 1))
            descs.append(dict(type="box", cx=cx, cy=cy, z0=0.0, z1=z1, hx=hx, hy=hy, heading=heading))
        elif kind == "cylinder":
            r = float(rng.uniform(2, 15))
            z1 = float(rng.uniform(5, 70))
            prims.append(Cylinder(cx, cy, 0.0, z1, r, (0.5, 0.5, 0.5), i + 1))
            descs.append(dict(type="cylinder", cx=cx, cy=cy, z0=0.0, z1=z1, radius=r))
        elif kind == "dome":
            r = float(rng.uniform(5, 18))
            cz = float(rng.uniform(0, 25))
            prims.append(Dome(cx, cy, cz, r, (0.5, 0.5, 0.5), i + 1))
            descs.append(dict(type="dome", cx=cx, cy=cy, cz=cz, radius=r))
        else:
            r0 = float(rng.uniform(8, 16))
            r1 = float(rng.uniform(4, r0))
            z1 = float(rng.uniform(20, 60))
            prims.append(Frustum(cx, cy, 0.0, z1, r0, r1, (0.5, 0.5, 0.5), i + 1))
            descs.append(dict(type="frustum", cx=cx, cy=cy, z0=0.0, z1=z1, r0=r0, r1=r1))
    params = AcquisitionParams(
        altitude=float(rng.uniform(150, 800)),
        off_nadir_deg=float(rng.uniform(0, 45)),
        azimuth_deg=float(rng.uniform(0, 360)),
        fov_deg=float(rng.uniform(10, 30)),
        image_px=128,
    )
    return prims, descs, params


def test_build_geometry_empty():
    layout = generate_layout(GridSpec(4, 4), {}, seed=1)
    geom = build_geometry(layout)
    assert geom.structural == ()


def test_build_geometry_one_reactor():
    layout = generate_layout(GridSpec(4, 4), {StructureType.REACTOR: 1}, seed=1)
    geom = build_geometry(layout)
    assert {p.instance_id for p in geom.structural} == {1}


def test_cooling_tower_bounding_radius():
    layout = generate_layout(GridSpec(4, 4), {StructureType.COOLING_TOWER: 1}, seed=1)
    geom = build_geometry(layout)
    tower = geom.structural[0]
    assert max(tower.r0, tower.r1) <= layout.grid.cell_size * np.sqrt(2)


def test_empty_scene_ground_depth():
    h = 1000.0
    pose = resolve_pose(AcquisitionParams(altitude=h, fov_deg=10.0), (0.0, 0.0))
    out = render(SceneGeometry(structural=()), pose, DAY, 64)
    assert (out.depth >= h - 1e-9).all()
    assert abs(out.depth[32, 32] - h) <= 1e-4 * h
    assert (out.instance_mask == 0).all()


def test_cube_center_depth():
    h = 2000.0
    cube = SceneGeometry(
        structural=(Box(0.0, 0.0, 0.0, 10.0, 15.0, 15.0, 0.0, (0.5, 0.5, 0.5), 1),)
    )
    pose = resolve_pose(AcquisitionParams(altitude=h, fov_deg=10.0), (0.0, 0.0))
    out = render(cube, pose, DAY, 128)
    assert abs(out.depth[64, 64] - (h - 10.0)) <= 1e-4 * h
    assert out.instance_mask[64, 64] == 1


@pytest.mark.parametrize("seed", range(5))
def test_depth_matches_oracle(seed):
    prims, descs, params = random_oracle_scene(seed)
    pose = resolve_pose(params, (0.0, 0.0))
    out = render(SceneGeometry(structural=tuple(prims)), pose, DAY, 128)
    ref = np.array(trace_depth(descs, pose.position, pose.look_dir, pose.up_dir, pose.fov_deg, 128))
    assert np.abs(out.depth - ref).max() <= 1e-4


def test_mask_values_in_layout_ids(default_layout, default_render):
    ids = {s.instance_id for s in default_layout.structures}
    assert set(np.unique(default_render.instance_mask)).issubset(ids | {0})


def test_mask_implies_closer_than_ground(default_render):
    pose = resolve_pose(AcquisitionParams(altitude=500_000.0, fov_deg=0.05, image_px=128), (0.0, 0.0))
    d = _ray_dirs(pose, 128, 0, 128)
    ground = _ground_t(np.asarray(pose.position), d)
    m = default_render.instance_mask > 0
    assert m.any()
    assert (default_render.depth[m] < ground[m]).all()


def test_rgb_bounds_and_night_ambient(default_layout):
    geom = build_geometry(default_layout)
    pose = resolve_pose(AcquisitionParams(altitude=500_000.0, fov_deg=0.05, image_px=64), (0.0, 0.0))
    night = render(geom, pose, sun_for_time("night"), 64)
    assert night.rgb.max() <= 255 * sun_for_time("night").ambient + 1


def test_render_deterministic_across_workers(default_layout):
    geom = build_geometry(default_layout)
    pose = resolve_pose(AcquisitionParams(altitude=500_000.0, fov_deg=0.05, image_px=96), (0.0, 0.0))
    a = render(geom, pose, DAY, 96, workers=1)
    b = render(geom, pose, DAY, 96, workers=5)
    assert np.array_equal(a.rgb, b.rgb)
    assert np.array_equal(a.depth, b.depth)
    assert np.array_equal(a.instance_mask, b.instance_mask)
    for name in ("cars", "steam"):
        assert np.array_equal(a.detail_layers[name][0], b.detail_layers[name][0])
        assert np.array_equal(a.detail_layers[name][1], b.detail_layers[name][1])


def test_off_nadir_lean():
    tall = SceneGeometry(
        structural=(Box(0.0, 0.0, 0.0, 60.0, 15.0, 15.0, 0.0, (0.5, 0.5, 0.5), 1),)
    )
    centroids = {}
    for theta in (0.0, 35.0):
        pose = resolve_pose(
            AcquisitionParams(altitude=2000.0, off_nadir_deg=theta, azimuth_deg=0.0, fov_deg=10.0),
            (0.0, 0.0),
        )
        mask = render(tall, pose, DAY, 128).instance_mask
        ys, xs = np.nonzero(mask)
        centroids[theta] = (ys.mean(), xs.mean())
    assert abs(centroids[0.0][0] - 63.5) <= 1.0
    assert abs(centroids[0.0][1] - 63.5) <= 1.0
    # camera north of target: the roof leans away, shifting rows
    assert abs(centroids[35.0][0] - centroids[0.0][0]) > 1.0


def test_small_image_rejected(default_layout):
    geom = build_geometry(default_layout)
    pose = resolve_pose(AcquisitionParams(altitude=1000.0, fov_deg=10.0), (0.0, 0.0))
    with pytest.raises(InvalidParams):
        render(geom, pose, DAY, 8)


def test_degenerate_pose_rejected():
    pose = CameraPose(
        position=(0.0, 0.0, 100.0),
        look_dir=(0.0, 0.0, -1.0),
        up_dir=(0.0, 0.0, -1.0),
        fov_deg=10.0,
    )
    with pytest.raises(DegeneratePose):
        render(SceneGeometry(structural=()), pose, DAY, 16)


def test_detail_layer_cars_empty_when_inactive():
    layout = generate_layout(GridSpec(8, 8), FIG2_COUNTS, seed=42)  # activity 0
    geom = build_geometry(layout)
    pose = resolve_pose(AcquisitionParams(altitude=500_000.0, fov_deg=0.05, image_px=64), (0.0, 0.0))
    rgb, alpha = render_detail_only(geom, pose, DAY, 64, "cars")
    assert alpha.sum() == 0


def test_detail_layer_car_blob():
    layout = add_activity(generate_layout(GridSpec(8, 8), FIG2_COUNTS, seed=42), 1.0, 7)
    geom = build_geometry(layout)
    pose = resolve_pose(AcquisitionParams(altitude=500_000.0, fov_deg=0.05, image_px=192), (0.0, 0.0))
    rgb, alpha = render_detail_only(geom, pose, DAY, 192, "cars")
    assert (alpha > 0).sum() > 0
    assert set(np.unique(alpha)).issubset({0.0, 1.0})


def test_steam_alpha_monotone_in_intensity():
    base = generate_layout(GridSpec(8, 8), FIG2_COUNTS, seed=42)
    pose = resolve_pose(AcquisitionParams(altitude=500_000.0, fov_deg=0.05, image_px=96), (0.0, 0.0))
    full = render_detail_only(build_geometry(add_activity(base, 1.0, 7)), pose, DAY, 96, "steam")[1]
    half = render_detail_only(build_geometry(add_activity(base, 0.5, 7)), pose, DAY, 96, "steam")[1]
    assert (full >= half - 1e-12).all()
    assert full.max() <= 1.0
    assert full.sum() > 0


def test_clouds_placeholder_layer(default_layout):
    geom = build_geometry(default_layout)
    pose = resolve_pose(AcquisitionParams(altitude=500_000.0, fov_deg=0.05, image_px=64), (0.0, 0.0))
    rgb, alpha = render_detail_only(geom, pose, DAY, 64, "clouds")
    assert alpha.sum() == 0
    with pytest.raises(UnknownLayer):
        render_detail_only(geom, pose, DAY, 64, "fog")


def test_shadow_option_darkens(default_layout):
    geom = build_geometry(default_layout)
    pose = resolve_pose(AcquisitionParams(altitude=500_000.0, fov_deg=0.05, image_px=64), (0.0, 0.0))
    plain = render(geom, pose, sun_for_time("evening"), 64)
    shadowed = render(geom, pose, sun_for_time("evening"), 64, with_shadows=True)
    assert int(shadowed.rgb.astype(int).sum()) < int(plain.rgb.astype(int).sum())
    assert np.array_equal(plain.depth, shadowed.depth)
