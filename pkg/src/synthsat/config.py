"""Scenario configuration: strict line-oriented dotted-key format.

One `key.path = value` per line, `#` comments, UTF-8.  Unknown keys are
rejected, every violation is reported (not just the first), and
serialize/parse round-trips exactly.  The full key table with defaults
lives in docs/config_format.md.
"""

from __future__ import annotations

import datetime as _dt
import re
from dataclasses import dataclass, field, replace

from .compositor import COVERAGE_TARGETS, DEFAULT_STAGE_ORDER
from .errors import ParseError, ValidationError
from .gateway import ENVIRONMENT_PHRASES, MODALITIES, SEASONS
from .scene import StructureType

_KEY_RE = re.compile(r"^[A-Za-z0-9_.]+$")

DEFAULT_COUNTS = {
    StructureType.REACTOR: 1,
    StructureType.COOLING_TOWER: 2,
    StructureType.STACK: 1,
    StructureType.BUILDING: 4,
}

COMBINATION_POLICIES = ("single", "all16")
CLOUD_LEVELS = ("none",) + tuple(sorted(COVERAGE_TARGETS))


@dataclass(frozen=True)
class SceneConfig:
    rows: int = 8
    cols: int = 8
    cell_size: float = 30.0
    seed: int = 0
    counts: dict = field(default_factory=lambda: dict(DEFAULT_COUNTS))


@dataclass(frozen=True)
class ActivityEntry:
    time_s: float
    level: float


@dataclass(frozen=True)
class SatelliteConfig:
    period_s: float
    phase: float = 0.0
    max_off_nadir_deg: float = 45.0


@dataclass(frozen=True)
class AcquisitionConfig:
    epoch: str = "2026-01-01T00:00:00Z"
    window_start_s: float = 0.0
    window_end_s: float = 86400.0
    altitude_m: float = 500_000.0
    constellation_seed: int = 0
    coarse_step_s: float = 60.0
    fov_deg: float = 0.05
    image_px: int = 256
    satellites: tuple = ()
    morning_start_h: float = 5.0
    day_start_h: float = 10.0
    evening_start_h: float = 17.0
    night_start_h: float = 21.0


@dataclass(frozen=True)
class SynthesisConfig:
    backend: str = "mock"
    timeout_s: float = 30.0
    max_in_flight: int = 4
    combination_policy: str = "single"
    modalities: tuple = ("canny", "depth")
    output_px: int = 0  # 0 = follow acquisition.image_px
    text_guidance_scale: float = 10.0
    season: str = ""
    environment: str = ""


@dataclass(frozen=True)
class CompositorConfig:
    cloud_level: str = "none"
    mood_weight: float = 0.35
    psf_sigma_px: float = 1.0
    target_gsd_m: float = 0.0  # 0 = native; else max(native, this)
    stage_order: tuple = DEFAULT_STAGE_ORDER


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    overwrite: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    scene: SceneConfig = SceneConfig()
    activity: tuple = (ActivityEntry(0.0, 0.5),)
    acquisition: AcquisitionConfig = AcquisitionConfig()
    synthesis: SynthesisConfig = SynthesisConfig()
    compositor: CompositorConfig = CompositorConfig()
    output: OutputConfig = OutputConfig()
    workers: int = 0  # 0 = cpu count


def _parse_scalar(text: str):
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return text[1:-1]
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _parse_lines(text: str) -> dict:
    entries: dict[str, tuple[object, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", line=lineno, column=len(raw) - len(raw.lstrip()) + 1)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not _KEY_RE.match(key):
            raise ParseError(f"invalid key {key!r}", line=lineno, column=raw.index(key.split('.')[0][0]) + 1 if key else 1)
        if not value:
            raise ParseError(f"missing value for {key!r}", line=lineno, column=raw.index("=") + 2)
        if key in entries:
            raise ParseError(f"duplicate key {key!r}", line=lineno)
        entries[key] = (_parse_scalar(value), lineno)
    return entries


class _Reader:
    def __init__(self, entries: dict):
        self.entries = dict(entries)
        self.problems: list[str] = []

    def _fail(self, key, message):
        line = ""
        if key in self.entries:
            line = f" (line {self.entries[key][1]})"
        self.problems.append(f"{key}: {message}{line}")

    def take(self, key, kind, default, lo=None, hi=None, choices=None, hi_exclusive=False):
        if key not in self.entries:
            return default
        value, _ = self.entries[key]
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if kind is str and not isinstance(value, str):
            value = str(value)
        if not isinstance(value, kind) or isinstance(value, bool) != (kind is bool):
            self._fail(key, f"expected {kind.__name__}, got {value!r}")
            del self.entries[key]
            return default
        del self.entries[key]
        if lo is not None and value < lo:
            self._fail(key, f"must be >= {lo}, got {value}")
            return default
        if hi is not None and (value >= hi if hi_exclusive else value > hi):
            bound = f"< {hi}" if hi_exclusive else f"<= {hi}"
            self._fail(key, f"must be {bound}, got {value}")
            return default
        if choices is not None and value not in choices:
            self._fail(key, f"must be one of {sorted(choices)}, got {value!r}")
            return default
        return value

    def indexed_group(self, prefix: str) -> list[int]:
        pattern = re.compile(re.escape(prefix) + r"\.(\d+)\.")
        found = sorted({int(m.group(1)) for k in self.entries if (m := pattern.match(k))})
        for n, idx in enumerate(found):
            if idx != n:
                self._fail(f"{prefix}.{idx}", f"indices must be contiguous from 0, missing {prefix}.{n}")
                return []
        return found

    def reject_leftovers(self):
        for key, (_, lineno) in sorted(self.entries.items()):
            self.problems.append(f"{key}: unknown key (line {lineno})")


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate; raises ParseError (syntax) or ValidationError (semantics)."""
    reader = _Reader(_parse_lines(text))
    r = reader

    scene = SceneConfig(
        rows=r.take("scene.grid.rows", int, 8, lo=1),
        cols=r.take("scene.grid.cols", int, 8, lo=1),
        cell_size=r.take("scene.grid.cell_size", float, 30.0, lo=1e-9),
        seed=r.take("scene.seed", int, 0, lo=0),
        counts={
            kind: r.take(f"scene.counts.{kind.value}", int, DEFAULT_COUNTS[kind], lo=0)
            for kind in StructureType
        },
    )

    schedule_ids = r.indexed_group("activity.schedule")
    activity = tuple(
        ActivityEntry(
            time_s=r.take(f"activity.schedule.{i}.time_s", float, 0.0),
            level=r.take(f"activity.schedule.{i}.level", float, 0.5, lo=0.0, hi=1.0),
        )
        for i in schedule_ids
    ) or (ActivityEntry(0.0, 0.5),)

    sat_ids = r.indexed_group("acquisition.satellite")
    satellites = tuple(
        SatelliteConfig(
            period_s=r.take(f"acquisition.satellite.{i}.period_s", float, 5400.0, lo=1e-9),
            phase=r.take(f"acquisition.satellite.{i}.phase", float, 0.0, lo=0.0, hi=1.0, hi_exclusive=True),
            max_off_nadir_deg=r.take(
                f"acquisition.satellite.{i}.max_off_nadir_deg", float, 45.0, lo=0.0, hi=60.0, hi_exclusive=True
            ),
        )
        for i in sat_ids
    )

    acquisition = AcquisitionConfig(
        epoch=r.take("acquisition.epoch", str, "2026-01-01T00:00:00Z"),
        window_start_s=r.take("acquisition.window.start_s", float, 0.0),
        window_end_s=r.take("acquisition.window.end_s", float, 86400.0),
        altitude_m=r.take("acquisition.altitude_m", float, 500_000.0, lo=1e-9),
        constellation_seed=r.take("acquisition.constellation_seed", int, 0, lo=0),
        coarse_step_s=r.take("acquisition.coarse_step_s", float, 60.0, lo=1e-9),
        fov_deg=r.take("acquisition.fov_deg", float, 0.05, lo=1e-12, hi=60.0, hi_exclusive=True),
        image_px=r.take("acquisition.image_px", int, 256, lo=16),
        satellites=satellites,
        morning_start_h=r.take("acquisition.time_of_day.morning_start_h", float, 5.0, lo=0.0, hi=24.0),
        day_start_h=r.take("acquisition.time_of_day.day_start_h", float, 10.0, lo=0.0, hi=24.0),
        evening_start_h=r.take("acquisition.time_of_day.evening_start_h", float, 17.0, lo=0.0, hi=24.0),
        night_start_h=r.take("acquisition.time_of_day.night_start_h", float, 21.0, lo=0.0, hi=24.0),
    )

    modalities_raw = r.take("synthesis.modalities", str, "canny,depth")
    modalities = tuple(m.strip() for m in modalities_raw.split(",") if m.strip())
    for m in modalities:
        if m not in MODALITIES:
            reader.problems.append(f"synthesis.modalities: unknown modality {m!r}")

    synthesis = SynthesisConfig(
        backend=r.take("synthesis.backend", str, "mock"),
        timeout_s=r.take("synthesis.timeout_s", float, 30.0, lo=1e-9),
        max_in_flight=r.take("synthesis.max_in_flight", int, 4, lo=1),
        combination_policy=r.take(
            "synthesis.combination_policy", str, "single", choices=COMBINATION_POLICIES
        ),
        modalities=modalities,
        output_px=r.take("synthesis.output_px", int, 0, lo=0),
        text_guidance_scale=r.take("synthesis.text_guidance_scale", float, 10.0, lo=1e-9),
        season=r.take("synthesis.prompt.season", str, "", choices=("",) + SEASONS),
        environment=r.take(
            "synthesis.prompt.environment", str, "", choices=("",) + tuple(sorted(ENVIRONMENT_PHRASES))
        ),
    )

    stage_raw = r.take("compositor.stage_order", str, ",".join(DEFAULT_STAGE_ORDER))
    stage_order = tuple(s.strip() for s in stage_raw.split(",") if s.strip())
    if sorted(stage_order) != sorted(DEFAULT_STAGE_ORDER):
        reader.problems.append(
            f"compositor.stage_order: must be a permutation of {list(DEFAULT_STAGE_ORDER)}, got {list(stage_order)}"
        )
        stage_order = DEFAULT_STAGE_ORDER

    compositor = CompositorConfig(
        cloud_level=r.take("compositor.cloud_level", str, "none", choices=CLOUD_LEVELS),
        mood_weight=r.take("compositor.mood_weight", float, 0.35, lo=0.0, hi=1.0),
        psf_sigma_px=r.take("compositor.psf_sigma_px", float, 1.0, lo=0.0),
        target_gsd_m=r.take("compositor.target_gsd_m", float, 0.0, lo=0.0),
        stage_order=stage_order,
    )

    output = OutputConfig(
        directory=r.take("output.directory", str, "out"),
        overwrite=r.take("output.overwrite", bool, False),
    )
    workers = r.take("run.workers", int, 0, lo=0)
    reader.reject_leftovers()

    cfg = ScenarioConfig(
        scene=scene,
        activity=activity,
        acquisition=acquisition,
        synthesis=synthesis,
        compositor=compositor,
        output=output,
        workers=workers,
    )
    problems = reader.problems + _cross_validate(cfg)
    if problems:
        raise ValidationError(problems)
    return cfg


def _cross_validate(cfg: ScenarioConfig) -> list[str]:
    problems = []
    acq = cfg.acquisition
    if acq.window_end_s <= acq.window_start_s:
        problems.append(
            f"acquisition.window: end must be after start, got ({acq.window_start_s}, {acq.window_end_s})"
        )
    try:
        parse_epoch(acq.epoch)
    except ValueError as exc:
        problems.append(f"acquisition.epoch: {exc}")
    for entry in cfg.activity:
        if not (acq.window_start_s <= entry.time_s <= acq.window_end_s):
            problems.append(
                f"activity.schedule: time {entry.time_s} outside window "
                f"[{acq.window_start_s}, {acq.window_end_s}]"
            )
    times = [e.time_s for e in cfg.activity]
    if times != sorted(times):
        problems.append("activity.schedule: entries must be sorted by time_s")
    if acq.satellites and acq.coarse_step_s > min(s.period_s for s in acq.satellites) / 4.0:
        problems.append(
            "acquisition.coarse_step_s: must be <= min satellite period / 4 for reliable pass detection"
        )
    if cfg.synthesis.combination_policy == "single" and not cfg.synthesis.modalities:
        problems.append("synthesis.modalities: single policy needs at least one modality (or use all16)")
    return problems


def parse_epoch(text: str) -> _dt.datetime:
    iso = text.replace("Z", "+00:00")
    try:
        dt = _dt.datetime.fromisoformat(iso)
    except ValueError:
        raise ValueError(f"not an ISO-8601 timestamp: {text!r}")
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=_dt.timezone.utc)
    return dt


def event_timestamp(cfg: ScenarioConfig, seconds: float) -> str:
    dt = parse_epoch(cfg.acquisition.epoch) + _dt.timedelta(seconds=seconds)
    return dt.isoformat().replace("+00:00", "Z")


def activity_level_at(cfg: ScenarioConfig, t: float) -> float:
    """Step-function schedule: each entry's level holds until the next entry."""
    level = cfg.activity[0].level
    for entry in cfg.activity:
        if entry.time_s <= t:
            level = entry.level
        else:
            break
    return level


def time_of_day_tag(cfg: ScenarioConfig, t: float) -> str:
    acq = cfg.acquisition
    epoch = parse_epoch(acq.epoch)
    local = epoch + _dt.timedelta(seconds=t)
    hour = local.hour + local.minute / 60.0 + local.second / 3600.0
    bounds = (
        ("morning", acq.morning_start_h),
        ("day", acq.day_start_h),
        ("evening", acq.evening_start_h),
        ("night", acq.night_start_h),
    )
    tag = "night"  # before morning_start counts as the previous night
    for name, start in bounds:
        if hour >= start:
            tag = name
    return tag


def _fmt_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    text = str(value)
    if text == "" or text != text.strip() or "#" in text or "=" in text:
        return f'"{text}"'
    return text


def serialize_config(cfg: ScenarioConfig) -> str:
    """Canonical text form; parse(serialize(cfg)) == cfg."""
    kv: dict[str, object] = {
        "scene.grid.rows": cfg.scene.rows,
        "scene.grid.cols": cfg.scene.cols,
        "scene.grid.cell_size": cfg.scene.cell_size,
        "scene.seed": cfg.scene.seed,
        "acquisition.epoch": cfg.acquisition.epoch,
        "acquisition.window.start_s": cfg.acquisition.window_start_s,
        "acquisition.window.end_s": cfg.acquisition.window_end_s,
        "acquisition.altitude_m": cfg.acquisition.altitude_m,
        "acquisition.constellation_seed": cfg.acquisition.constellation_seed,
        "acquisition.coarse_step_s": cfg.acquisition.coarse_step_s,
        "acquisition.fov_deg": cfg.acquisition.fov_deg,
        "acquisition.image_px": cfg.acquisition.image_px,
        "acquisition.time_of_day.morning_start_h": cfg.acquisition.morning_start_h,
        "acquisition.time_of_day.day_start_h": cfg.acquisition.day_start_h,
        "acquisition.time_of_day.evening_start_h": cfg.acquisition.evening_start_h,
        "acquisition.time_of_day.night_start_h": cfg.acquisition.night_start_h,
        "synthesis.backend": cfg.synthesis.backend,
        "synthesis.timeout_s": cfg.synthesis.timeout_s,
        "synthesis.max_in_flight": cfg.synthesis.max_in_flight,
        "synthesis.combination_policy": cfg.synthesis.combination_policy,
        "synthesis.modalities": ",".join(cfg.synthesis.modalities),
        "synthesis.output_px": cfg.synthesis.output_px,
        "synthesis.text_guidance_scale": cfg.synthesis.text_guidance_scale,
        "compositor.cloud_level": cfg.compositor.cloud_level,
        "compositor.mood_weight": cfg.compositor.mood_weight,
        "compositor.psf_sigma_px": cfg.compositor.psf_sigma_px,
        "compositor.target_gsd_m": cfg.compositor.target_gsd_m,
        "compositor.stage_order": ",".join(cfg.compositor.stage_order),
        "output.directory": cfg.output.directory,
        "output.overwrite": cfg.output.overwrite,
        "run.workers": cfg.workers,
    }
    for kind in StructureType:
        kv[f"scene.counts.{kind.value}"] = cfg.scene.counts.get(kind, 0)
    for i, entry in enumerate(cfg.activity):
        kv[f"activity.schedule.{i}.time_s"] = entry.time_s
        kv[f"activity.schedule.{i}.level"] = entry.level
    for i, sat in enumerate(cfg.acquisition.satellites):
        kv[f"acquisition.satellite.{i}.period_s"] = sat.period_s
        kv[f"acquisition.satellite.{i}.phase"] = sat.phase
        kv[f"acquisition.satellite.{i}.max_off_nadir_deg"] = sat.max_off_nadir_deg
    if cfg.synthesis.season:
        kv["synthesis.prompt.season"] = cfg.synthesis.season
    if cfg.synthesis.environment:
        kv["synthesis.prompt.environment"] = cfg.synthesis.environment
    lines = [f"{key} = {_fmt_value(kv[key])}" for key in sorted(kv)]
    return "\n".join(lines) + "\n"


def with_backend(cfg: ScenarioConfig, backend: str) -> ScenarioConfig:
    return replace(cfg, synthesis=replace(cfg.synthesis, backend=backend))


def scenario_identity(cfg: ScenarioConfig) -> str:
    """Canonical text of the scenario content only.

    Execution details that cannot change product bytes (output directory,
    worker count, transport settings) are normalized away, so reruns of the
    same scenario digest identically regardless of where or how they ran.
    """
    normalized = replace(
        cfg,
        synthesis=replace(cfg.synthesis, backend="", timeout_s=30.0, max_in_flight=4),
        output=OutputConfig(),
        workers=0,
    )
    return serialize_config(normalized)
