"""Scenario orchestration: schedule, render, extract, synthesize, composite.

Per acquisition event the full chain runs independently (bounded worker
pool), every stage seeded by hash(scenario seed, event index, stage name)
so inserting events never reshuffles existing ones.  Each event writes a
sidecar record under events/; re-running over an existing output directory
reuses digest-matching sidecars and recomputes the rest.  One event's
failure is recorded and never aborts the run.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import PROTO_VERSION, __version__
from .canonical import digest_of, digest_of_bytes
from .compositor import CloudLayer, CompositeRecipe, composite, generate_clouds
from .config import (
    ScenarioConfig,
    activity_level_at,
    event_timestamp,
    scenario_identity,
    time_of_day_tag,
)
from .control import extract_bundle
from .errors import FatalIoError, SynthSatError
from .gateway import (
    PromptSpec,
    SynthesisRequest,
    enumerate_combinations,
    render_prompt,
    synthesize_batch,
)
from .geometry import (
    AcquisitionParams,
    Constellation,
    Satellite,
    ground_sampling_distance,
    resolve_pose,
    schedule_acquisitions,
    sun_for_time,
)
from .imageio import png_encode, save_depth_tiff
from .manifest import finalize_manifest, write_manifest
from .render import build_geometry, render, render_detail_only
from .scene import add_activity, generate_layout, layout_to_dict, GridSpec
from .seeds import derive_seed


def build_constellation(cfg: ScenarioConfig) -> Constellation:
    acq = cfg.acquisition
    return Constellation(
        satellites=tuple(
            Satellite(s.period_s, s.phase, s.max_off_nadir_deg) for s in acq.satellites
        ),
        window=(acq.window_start_s, acq.window_end_s),
        altitude_m=acq.altitude_m,
        seed=acq.constellation_seed,
    )


def plan_events(cfg: ScenarioConfig):
    if not cfg.acquisition.satellites:
        return []
    return schedule_acquisitions(build_constellation(cfg), (0.0, 0.0), cfg.acquisition.coarse_step_s)


def _synthesis_calls_per_event(cfg: ScenarioConfig) -> int:
    return 16 if cfg.synthesis.combination_policy == "all16" else 1


def describe_scenario(cfg: ScenarioConfig) -> str:
    """Human-readable plan; pure, no side effects."""
    events = plan_events(cfg)
    per_event = _synthesis_calls_per_event(cfg)
    lines = [
        "scenario plan",
        f"  config digest: {digest_of(scenario_identity(cfg))}",
        f"  epoch: {cfg.acquisition.epoch}"
        f"  window: [{cfg.acquisition.window_start_s:.0f}, {cfg.acquisition.window_end_s:.0f}] s",
        f"  backend: {cfg.synthesis.backend}",
        f"  events: {len(events)}",
    ]
    for i, e in enumerate(events):
        lines.append(
            f"    [{i}] {event_timestamp(cfg, e.time)} sat {e.satellite_index}"
            f" off-nadir {e.off_nadir_deg:.1f} deg azimuth {e.azimuth_deg:.1f} deg"
            f" {time_of_day_tag(cfg, e.time)} activity {activity_level_at(cfg, e.time):.2f}"
        )
    files_per_event = 4 + 4 + 2 * per_event  # render/depth/mask/layout + bundle + per-call pair
    lines += [
        f"  combination policy: {cfg.synthesis.combination_policy} -> {per_event} calls per event",
        f"  total: {len(events) * per_event} synthesis calls",
        f"  estimated product files: {len(events) * files_per_event}",
    ]
    return "\n".join(lines) + "\n"


def _write_bytes(path: Path, data: bytes) -> dict:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)
    return {"path": str(path.name), "digest": digest_of_bytes(data)}


def _save_png_record(outdir: Path, rel: str, arr: np.ndarray) -> dict:
    data = png_encode(arr)
    rec = _write_bytes(outdir / rel, data)
    rec["path"] = rel
    return rec


def _event_seeds(cfg: ScenarioConfig, index: int) -> dict:
    base = cfg.scene.seed
    return {
        "activity": derive_seed(base, index, "activity"),
        "clouds": derive_seed(base, index, "clouds"),
        "synthesis": derive_seed(base, index, "synthesis"),
    }


def _compute_event(cfg: ScenarioConfig, layout_base, event, index: int, outdir: Path) -> dict:
    acq = cfg.acquisition
    seeds = _event_seeds(cfg, index)
    level = activity_level_at(cfg, event.time)
    tod = time_of_day_tag(cfg, event.time)
    sun = sun_for_time(tod)
    layout = add_activity(layout_base, level, seeds["activity"])
    geom = build_geometry(layout)

    params = AcquisitionParams(
        altitude=acq.altitude_m,
        off_nadir_deg=event.off_nadir_deg,
        azimuth_deg=event.azimuth_deg,
        fov_deg=acq.fov_deg,
        image_px=acq.image_px,
    )
    pose = resolve_pose(params, (0.0, 0.0))
    out = render(geom, pose, sun, acq.image_px)

    prefix = (
        f"e{index:03d}_s{cfg.scene.seed}_t{int(round(event.time)):08d}"
        f"_on{int(round(event.off_nadir_deg)):02d}"
    )
    files = {}
    files["layout"] = _write_bytes(
        outdir / "renders" / f"{prefix}_layout.json",
        (json.dumps(layout_to_dict(layout), sort_keys=True, indent=1) + "\n").encode("utf-8"),
    )
    files["layout"]["path"] = f"renders/{prefix}_layout.json"
    files["render"] = _save_png_record(outdir, f"renders/{prefix}_render.png", out.rgb)
    depth_path = outdir / "renders" / f"{prefix}_depth.tif"
    save_depth_tiff(depth_path, out.depth)
    files["depth"] = {
        "path": f"renders/{prefix}_depth.tif",
        "digest": digest_of_bytes(depth_path.read_bytes()),
    }
    mask16 = np.clip(out.instance_mask, 0, 255).astype(np.uint8)
    files["mask"] = _save_png_record(outdir, f"renders/{prefix}_mask.png", mask16)

    bundle = extract_bundle(out.rgb, out.depth)
    files["canny"] = _save_png_record(outdir, f"control/{prefix}_canny.png", bundle.canny)
    files["depth8"] = _save_png_record(outdir, f"control/{prefix}_depth8.png", bundle.depth8)
    files["sketch"] = _save_png_record(outdir, f"control/{prefix}_sketch.png", bundle.sketch)
    files["color"] = _save_png_record(outdir, f"control/{prefix}_color.png", bundle.color_blocks)

    spec = PromptSpec(
        season=cfg.synthesis.season or None, environment=cfg.synthesis.environment or None
    )
    prompt = render_prompt(spec)
    output_px = cfg.synthesis.output_px or acq.image_px
    if cfg.synthesis.combination_policy == "all16":
        requests_list = enumerate_combinations(
            bundle,
            prompt,
            synthesis_seed=seeds["synthesis"],
            output_px=output_px,
            text_guidance_scale=cfg.synthesis.text_guidance_scale,
        )
    else:
        maps_all = {
            "canny": bundle.canny,
            "depth": bundle.depth8,
            "sketch": bundle.sketch,
            "color": bundle.color_blocks,
        }
        requests_list = [
            SynthesisRequest(
                modalities=tuple(cfg.synthesis.modalities),
                maps={m: maps_all[m] for m in cfg.synthesis.modalities},
                prompt=prompt,
                synthesis_seed=seeds["synthesis"],
                output_px=output_px,
                text_guidance_scale=cfg.synthesis.text_guidance_scale,
            )
        ]
    results = synthesize_batch(
        requests_list,
        cfg.synthesis.backend,
        max_in_flight=cfg.synthesis.max_in_flight,
        timeout=cfg.synthesis.timeout_s,
    )

    native_gsd = ground_sampling_distance(params)[1]
    target_gsd = max(native_gsd, cfg.compositor.target_gsd_m)
    clouds: CloudLayer | None = None
    if cfg.compositor.cloud_level != "none":
        clouds = generate_clouds(cfg.compositor.cloud_level, seeds["clouds"], output_px)

    detail_layers = []
    for name in ("cars", "steam"):
        lrgb, lalpha = render_detail_only(geom, pose, sun, output_px, name)
        detail_layers.append((name, lrgb, lalpha))

    synth_records = []
    for k, (req, res) in enumerate(zip(requests_list, results)):
        synth_rec = {
            "combo_index": k,
            "modalities": list(req.modalities),
            "prompt": req.prompt,
            "text_guidance_scale": req.text_guidance_scale,
            "synthesis_seed": req.synthesis_seed,
            "request_digest": res.request_digest,
            "backend_id": res.backend_id,
            "latency_ms": res.latency_ms,
        }
        synth_rec["synth_file"] = _save_png_record(
            outdir, f"synth/{prefix}_c{k:02d}.png", res.image
        )
        recipe = CompositeRecipe(
            base_rgb=res.image,
            detail_layers=tuple(detail_layers),
            clouds=clouds,
            mood_tag=tod,
            mood_weight=cfg.compositor.mood_weight,
            psf_sigma_px=cfg.compositor.psf_sigma_px,
            native_gsd=native_gsd,
            target_gsd=target_gsd,
            stage_order=cfg.compositor.stage_order,
        )
        final = composite(recipe)
        synth_rec["final_file"] = _save_png_record(
            outdir, f"final/{prefix}_c{k:02d}_final.png", final
        )
        synth_records.append(synth_rec)

    return {
        "index": index,
        "status": "ok",
        "time_s": event.time,
        "timestamp": event_timestamp(cfg, event.time),
        "satellite_index": event.satellite_index,
        "off_nadir_deg": event.off_nadir_deg,
        "azimuth_deg": event.azimuth_deg,
        "time_of_day": tod,
        "activity_level": level,
        "seeds": seeds,
        "native_gsd_m": native_gsd,
        "target_gsd_m": target_gsd,
        "cloud_coverage": clouds.measured_coverage if clouds is not None else None,
        "files": files,
        "synthesis": synth_records,
    }


def _record_files(record: dict):
    for rec in record.get("files", {}).values():
        yield rec
    for s in record.get("synthesis", []):
        yield s["synth_file"]
        yield s["final_file"]


def _sidecar_reusable(record: dict, outdir: Path) -> bool:
    if record.get("status") != "ok":
        return False
    for rec in _record_files(record):
        path = outdir / rec["path"]
        if not path.is_file() or digest_of_bytes(path.read_bytes()) != rec["digest"]:
            return False
    return True


def _event_with_sidecar(cfg, layout_base, event, index, outdir: Path) -> dict:
    sidecar = outdir / "events" / f"e{index:03d}.json"
    if not cfg.output.overwrite and sidecar.is_file():
        try:
            record = json.loads(sidecar.read_text(encoding="utf-8"))
        except ValueError:
            record = None
        if record is not None and _sidecar_reusable(record, outdir):
            record["reused"] = True
            return record
    try:
        record = _compute_event(cfg, layout_base, event, index, outdir)
    except SynthSatError as exc:
        record = {
            "index": index,
            "status": "failed",
            "time_s": event.time,
            "timestamp": event_timestamp(cfg, event.time),
            "satellite_index": event.satellite_index,
            "error": f"{type(exc).__name__}: {exc}",
        }
    data = (json.dumps(record, sort_keys=True, indent=1) + "\n").encode("utf-8")
    tmp = sidecar.with_suffix(".json.tmp")
    tmp.write_bytes(data)
    tmp.replace(sidecar)
    return record


def run_scenario(cfg: ScenarioConfig) -> dict:
    """Run every scheduled acquisition and write products plus manifest.

    Returns the finalized manifest document.  Raises FatalIoError only when
    the output directory cannot be prepared or written.
    """
    outdir = Path(cfg.output.directory)
    try:
        for sub in ("renders", "control", "synth", "final", "events"):
            (outdir / sub).mkdir(parents=True, exist_ok=True)
        probe = outdir / ".write_probe"
        probe.write_bytes(b"ok")
        probe.unlink()
    except OSError as exc:
        raise FatalIoError(f"output directory not writable: {exc}") from exc

    events = plan_events(cfg)
    layout_base = generate_layout(
        GridSpec(cfg.scene.rows, cfg.scene.cols, cfg.scene.cell_size),
        cfg.scene.counts,
        cfg.scene.seed,
    )

    workers = cfg.workers or os.cpu_count() or 1
    if workers <= 1 or len(events) <= 1:
        records = [
            _event_with_sidecar(cfg, layout_base, e, i, outdir) for i, e in enumerate(events)
        ]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(
                pool.map(
                    lambda pair: _event_with_sidecar(cfg, layout_base, pair[1], pair[0], outdir),
                    enumerate(events),
                )
            )

    doc = {
        "tool": {"name": "synthsat", "version": __version__},
        "proto": PROTO_VERSION,
        "synthetic_provenance": True,
        "config_digest": digest_of(scenario_identity(cfg)),
        "config_text": scenario_identity(cfg),
        "run": {
            "output_directory": cfg.output.directory,
            "workers": cfg.workers,
            "backend": cfg.synthesis.backend,
            "overwrite": cfg.output.overwrite,
        },
        "epoch": cfg.acquisition.epoch,
        "event_count": len(records),
        "failed_count": sum(1 for r in records if r.get("status") != "ok"),
        "events": records,
    }
    doc = finalize_manifest(doc)
    try:
        write_manifest(outdir / "manifest.json", doc)
    except OSError as exc:
        raise FatalIoError(f"cannot write manifest: {exc}") from exc
    return doc
