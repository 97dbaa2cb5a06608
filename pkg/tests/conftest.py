import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synthsat.geometry import AcquisitionParams, resolve_pose, sun_for_time
from synthsat.render import build_geometry, render
from synthsat.scene import GridSpec, add_activity, generate_layout

from scene_fixtures import FIG2_COUNTS


@pytest.fixture(scope="session")
def default_layout():
    layout = generate_layout(GridSpec(8, 8), FIG2_COUNTS, seed=42)
    return add_activity(layout, 0.5, seed=7)


@pytest.fixture(scope="session")
def default_render(default_layout):
    params = AcquisitionParams(altitude=500_000.0, fov_deg=0.05, image_px=128)
    pose = resolve_pose(params, (0.0, 0.0))
    return render(build_geometry(default_layout), pose, sun_for_time("day"), 128)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    reports = []
    for key in ("passed", "failed"):
        reports += [r for r in terminalreporter.stats.get(key, []) if r.when == "call"]
    acceptance = [r for r in reports if "test_acceptance" in r.nodeid]
    if not acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for r in sorted(acceptance, key=lambda r: r.nodeid):
        name = r.nodeid.split("::")[-1]
        terminalreporter.write_line(f"[{'PASS' if r.passed else 'FAIL'}] {name}")
