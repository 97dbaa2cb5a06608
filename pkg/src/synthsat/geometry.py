"""Satellite acquisition geometry: poses, GSD, sun states, revisit schedules.

Overflight model (flat Earth, desk-scale): each satellite flies a straight
ground track at GROUND_SPEED_MPS with a fixed compass heading and a fixed
cross-track offset from the origin, both drawn once per satellite from the
constellation seed.  The track sweeps past the target once per orbital
period; an acquisition event fires at closest approach whenever the
required off-nadir angle, atan(ground distance / altitude), stays within
the satellite's limit.  Azimuth conventions are compass-style: 0 deg =
north (+y), 90 deg = east (+x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyWindow, InvalidParams, UnknownTimeTag
from .seeds import rng_for

GROUND_SPEED_MPS = 7000.0
CROSS_TRACK_SWEEP_DEG = 55.0

TIME_OF_DAY_TAGS = ("morning", "day", "evening", "night")

# elevation_deg, azimuth_deg, ambient
_SUN_TABLE = {
    "morning": (15.0, 90.0, 0.25),
    "day": (60.0, 180.0, 0.35),
    "evening": (10.0, 270.0, 0.25),
    "night": (-30.0, 0.0, 0.08),
}


@dataclass(frozen=True)
class AcquisitionParams:
    altitude: float
    off_nadir_deg: float = 0.0
    azimuth_deg: float = 0.0
    fov_deg: float = 0.05
    image_px: int = 512

    def __post_init__(self):
        if self.altitude <= 0:
            raise InvalidParams(f"altitude must be > 0, got {self.altitude}")
        if not (0.0 <= self.off_nadir_deg < 60.0):
            raise InvalidParams(f"off_nadir_deg must be in [0,60), got {self.off_nadir_deg}")
        if not (0.0 <= self.azimuth_deg < 360.0):
            raise InvalidParams(f"azimuth_deg must be in [0,360), got {self.azimuth_deg}")
        if not (0.0 < self.fov_deg < 60.0):
            raise InvalidParams(f"fov_deg must be in (0,60), got {self.fov_deg}")
        if self.image_px < 1:
            raise InvalidParams(f"image_px must be positive, got {self.image_px}")


@dataclass(frozen=True)
class CameraPose:
    position: tuple[float, float, float]
    look_dir: tuple[float, float, float]
    up_dir: tuple[float, float, float]
    fov_deg: float


@dataclass(frozen=True)
class SunState:
    elevation_deg: float
    azimuth_deg: float
    ambient: float
    color_temperature_tag: str

    @property
    def is_night(self) -> bool:
        return self.elevation_deg < 0

    def direction(self) -> tuple[float, float, float]:
        """Unit vector from a surface point toward the sun."""
        e = math.radians(self.elevation_deg)
        a = math.radians(self.azimuth_deg)
        return (math.cos(e) * math.sin(a), math.cos(e) * math.cos(a), math.sin(e))


@dataclass(frozen=True)
class Satellite:
    orbital_period_s: float
    phase_offset: float
    max_off_nadir_deg: float

    def __post_init__(self):
        if self.orbital_period_s <= 0:
            raise InvalidParams(f"orbital_period_s must be > 0, got {self.orbital_period_s}")
        if not (0.0 <= self.phase_offset < 1.0):
            raise InvalidParams(f"phase_offset must be in [0,1), got {self.phase_offset}")
        if not (0.0 <= self.max_off_nadir_deg < 60.0):
            raise InvalidParams(f"max_off_nadir_deg must be in [0,60), got {self.max_off_nadir_deg}")


@dataclass(frozen=True)
class Constellation:
    satellites: tuple[Satellite, ...]
    window: tuple[float, float]
    altitude_m: float = 500_000.0
    seed: int = 0


@dataclass(frozen=True)
class AcquisitionEvent:
    time: float
    satellite_index: int
    off_nadir_deg: float
    azimuth_deg: float


def _normalize(v):
    n = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    return (v[0] / n, v[1] / n, v[2] / n)


def _cross(a, b):
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def resolve_pose(params: AcquisitionParams, target=(0.0, 0.0)) -> CameraPose:
    """Place the camera on the off-nadir cone above `target`, looking at it.

    The camera sits at the configured altitude above the ground plane, so
    the slant range to the target is altitude / cos(off_nadir).  Roll-free
    orientation: image-up is the world-vertical projected off the look
    direction (north at nadir).
    """
    tx, ty = float(target[0]), float(target[1])
    tz = float(target[2]) if len(target) > 2 else 0.0
    theta = math.radians(params.off_nadir_deg)
    az = math.radians(params.azimuth_deg)
    slant = params.altitude / math.cos(theta)
    horiz = slant * math.sin(theta)
    position = (tx + horiz * math.sin(az), ty + horiz * math.cos(az), tz + params.altitude)
    look = _normalize((tx - position[0], ty - position[1], tz - position[2]))
    hint = (0.0, 1.0, 0.0) if abs(look[2]) > 0.999999 else (0.0, 0.0, 1.0)
    right = _normalize(_cross(look, hint))
    up = _cross(right, look)
    dot = up[0] * look[0] + up[1] * look[1] + up[2] * look[2]
    up = _normalize((up[0] - dot * look[0], up[1] - dot * look[1], up[2] - dot * look[2]))
    return CameraPose(position=position, look_dir=look, up_dir=up, fov_deg=params.fov_deg)


def ground_sampling_distance(params: AcquisitionParams) -> tuple[float, float]:
    """(gsd_along, gsd_across) in meters per pixel at the target."""
    theta = math.radians(params.off_nadir_deg)
    slant = params.altitude / math.cos(theta)
    gsd_across = 2.0 * slant * math.tan(math.radians(params.fov_deg) / 2.0) / params.image_px
    gsd_along = gsd_across / math.cos(theta)
    return gsd_along, gsd_across


def ground_footprint_corners(pose: CameraPose):
    """Ground-plane hits of the four image-corner rays.

    Order: top-left, top-right, bottom-right, bottom-left in image space.
    """
    look = pose.look_dir
    right = _normalize(_cross(look, pose.up_dir))
    up = pose.up_dir
    t = math.tan(math.radians(pose.fov_deg) / 2.0)
    corners = []
    for u, v in ((-1, 1), (1, 1), (1, -1), (-1, -1)):
        d = (
            look[0] + t * (u * right[0] + v * up[0]),
            look[1] + t * (u * right[1] + v * up[1]),
            look[2] + t * (u * right[2] + v * up[2]),
        )
        if d[2] >= 0:
            raise InvalidParams("corner ray does not reach the ground plane")
        s = -pose.position[2] / d[2]
        corners.append((pose.position[0] + s * d[0], pose.position[1] + s * d[1]))
    return corners


def sun_for_time(time_of_day: str) -> SunState:
    """Fixed lookup of the scenario sun state for a time-of-day tag."""
    if time_of_day not in _SUN_TABLE:
        raise UnknownTimeTag(f"time_of_day must be one of {TIME_OF_DAY_TAGS}, got {time_of_day!r}")
    elev, az, ambient = _SUN_TABLE[time_of_day]
    return SunState(
        elevation_deg=elev, azimuth_deg=az, ambient=ambient, color_temperature_tag=time_of_day
    )


@dataclass(frozen=True)
class _TrackParams:
    heading_deg: float
    cross_track_m: float  # signed offset of the track line from the origin


def satellite_track(c: Constellation, index: int) -> _TrackParams:
    """Per-satellite track parameters drawn once from the constellation seed."""
    sat = c.satellites[index]
    sweep = c.altitude_m * math.tan(math.radians(CROSS_TRACK_SWEEP_DEG))
    u = rng_for(c.seed, "cross_track", index).uniform(-1.0, 1.0)
    heading = rng_for(c.seed, "heading", index).uniform(0.0, 360.0)
    del sat
    return _TrackParams(heading_deg=float(heading), cross_track_m=float(u * sweep))


def subsatellite_point(c: Constellation, index: int, t: float) -> tuple[float, float]:
    """Ground-track point of satellite `index` at time `t` (meters)."""
    sat = c.satellites[index]
    track = satellite_track(c, index)
    h = math.radians(track.heading_deg)
    d = (math.sin(h), math.cos(h))  # along-track unit (east, north)
    r = (math.cos(h), -math.sin(h))  # right-of-track unit
    p = (t / sat.orbital_period_s + sat.phase_offset) % 1.0
    s = GROUND_SPEED_MPS * sat.orbital_period_s * (p - 0.5)
    return (
        track.cross_track_m * r[0] + s * d[0],
        track.cross_track_m * r[1] + s * d[1],
    )


def off_nadir_at(c: Constellation, index: int, t: float, target=(0.0, 0.0)) -> float:
    """Off-nadir angle (deg) needed to image `target` at time `t`."""
    gx, gy = subsatellite_point(c, index, t)
    dist = math.hypot(gx - target[0], gy - target[1])
    return math.degrees(math.atan(dist / c.altitude_m))


def schedule_acquisitions(
    c: Constellation, target=(0.0, 0.0), coarse_step: float = 60.0
) -> list[AcquisitionEvent]:
    """Events at each overflight closest approach within the epoch window.

    Scans the window at `coarse_step`, takes interior local minima of the
    off-nadir curve as pass centers (so event times are accurate to one
    step), and admits a pass when the satellite's analytic closest-approach
    off-nadir stays within its limit.  Requires coarse_step <= min
    period / 4 so no pass can slip between samples.
    """
    t0, t1 = c.window
    if t1 <= t0:
        raise EmptyWindow(f"window must satisfy t1 > t0, got ({t0}, {t1})")
    if coarse_step <= 0:
        raise InvalidParams(f"coarse_step must be > 0, got {coarse_step}")
    if not c.satellites:
        return []
    min_period = min(s.orbital_period_s for s in c.satellites)
    if coarse_step > min_period / 4.0:
        raise InvalidParams(
            f"coarse_step {coarse_step} too large for shortest period {min_period}"
        )

    times = np.arange(t0, t1 + coarse_step / 2.0, coarse_step)
    events: list[AcquisitionEvent] = []
    for i, sat in enumerate(c.satellites):
        track = satellite_track(c, i)
        h = math.radians(track.heading_deg)
        d = np.array([math.sin(h), math.cos(h)])
        r = np.array([math.cos(h), -math.sin(h)])
        p = (times / sat.orbital_period_s + sat.phase_offset) % 1.0
        s = GROUND_SPEED_MPS * sat.orbital_period_s * (p - 0.5)
        gx = track.cross_track_m * r[0] + s * d[0] - target[0]
        gy = track.cross_track_m * r[1] + s * d[1] - target[1]
        theta = np.degrees(np.arctan(np.hypot(gx, gy) / c.altitude_m))

        # closest-approach off-nadir is analytic in this model
        offset = track.cross_track_m - (target[0] * r[0] + target[1] * r[1])
        theta_min = math.degrees(math.atan(abs(offset) / c.altitude_m))
        if theta_min > sat.max_off_nadir_deg:
            continue
        if abs(offset) < 1e-9:
            azimuth = (track.heading_deg + 90.0) % 360.0
        else:
            azimuth = math.degrees(math.atan2(offset * r[0], offset * r[1])) % 360.0

        interior = (theta[1:-1] <= theta[:-2]) & (theta[1:-1] < theta[2:])
        for j in np.nonzero(interior)[0] + 1:
            events.append(
                AcquisitionEvent(
                    time=float(times[j]),
                    satellite_index=i,
                    off_nadir_deg=theta_min,
                    azimuth_deg=azimuth,
                )
            )
    events.sort(key=lambda e: (e.time, e.satellite_index))
    return events
