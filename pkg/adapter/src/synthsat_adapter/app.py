"""HTTP service implementing the synthsat synthesis protocol (version 1).

Thin by design: request schema enforcement, capability checks, queueing,
and base64/PNG codec work live here; everything model-shaped sits behind
the runner interface.  See docs/protocol.md in the pipeline repo for the
byte-level contract this must honor.
"""

from __future__ import annotations

import argparse
import base64
import io
import threading

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from PIL import Image
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import PROTO_HEADER, PROTO_VERSION
from .config import AdapterConfig, config_from_env
from .runners import SynthesisJob, load_runner


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": {"code": code, "message": message}},
        headers={"Retry-After": "1"} if status in (429, 503) else None,
    )


def _decode_map(b64: str) -> np.ndarray:
    raw = base64.b64decode(b64, validate=True)
    img = Image.open(io.BytesIO(raw))
    img.load()
    if img.mode not in ("L", "RGB"):
        img = img.convert("RGB")
    return np.asarray(img)


def _encode_png(arr: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _schema_problems(doc, max_output_px: int) -> list[str]:
    problems = []
    prompt = doc.get("prompt")
    if not isinstance(prompt, str) or not prompt:
        problems.append("prompt must be a non-empty string")
    scale = doc.get("text_guidance_scale")
    if not isinstance(scale, (int, float)) or isinstance(scale, bool) or scale <= 0:
        problems.append("text_guidance_scale must be a positive number")
    seed = doc.get("synthesis_seed")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        problems.append("synthesis_seed must be a nonnegative integer")
    px = doc.get("output_px")
    if not isinstance(px, int) or isinstance(px, bool) or px < 1 or px > max_output_px:
        problems.append(f"output_px must be an integer in [1, {max_output_px}]")
    if not isinstance(doc.get("modalities"), list):
        problems.append("modalities must be a list")
    if not isinstance(doc.get("maps", {}), dict):
        problems.append("maps must be an object")
    weights = doc.get("weights", {})
    if not isinstance(weights, dict):
        problems.append("weights must be an object")
    else:
        for m, w in weights.items():
            if not isinstance(w, (int, float)) or isinstance(w, bool) or not (0.0 <= w <= 2.0):
                problems.append(f"weight for {m!r} must be in [0,2]")
    return problems


def create_app(config: AdapterConfig | None = None, runner=None) -> FastAPI:
    """Build the service; passing `runner` skips warm-up (used by tests)."""
    config = config or AdapterConfig()
    app = FastAPI(title="synthsat-adapter", docs_url=None, redoc_url=None)
    state = {"runner": runner, "error": None}
    jobs = threading.Semaphore(config.max_jobs)

    if runner is None:

        def _warm_up():
            try:
                state["runner"] = load_runner(config)
            except Exception as exc:  # noqa: BLE001 - surfaced as 503 detail
                state["error"] = str(exc)

        threading.Thread(target=_warm_up, daemon=True).start()

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(request: Request, exc: StarletteHTTPException):
        code = {404: "not_found", 405: "method_not_allowed"}.get(exc.status_code, "error")
        return _error(exc.status_code, code, str(exc.detail))

    @app.get("/v1/capabilities")
    def capabilities():
        runner_obj = state["runner"]
        return {
            "proto": PROTO_VERSION,
            "modalities": config.capabilities_list(),
            "backend_id": config.backend_id,
            "model_name": getattr(runner_obj, "model_name", "loading"),
            "max_output_px": config.max_output_px,
        }

    @app.post("/v1/synthesize")
    async def synthesize(request: Request):
        if request.headers.get(PROTO_HEADER) != str(PROTO_VERSION):
            return _error(400, "bad_proto", f"{PROTO_HEADER} header must be {PROTO_VERSION}")
        try:
            doc = await request.json()
        except Exception as exc:  # noqa: BLE001 - any parse failure is a 400
            return _error(400, "malformed_json", str(exc))
        if not isinstance(doc, dict):
            return _error(400, "bad_request", "body must be a JSON object")

        problems = _schema_problems(doc, config.max_output_px)
        modalities = doc.get("modalities") if isinstance(doc.get("modalities"), list) else []
        maps_doc = doc.get("maps") if isinstance(doc.get("maps"), dict) else {}
        supported = set(config.capabilities_list())
        for m in modalities:
            if m not in supported:
                return _error(422, "unsupported_modality", f"modality {m!r} not in capabilities")
            if m not in maps_doc:
                problems.append(f"modality {m!r} has no map")
        if problems:
            return _error(400, "bad_request", "; ".join(problems))

        if state["error"] is not None:
            return _error(503, "model_unavailable", state["error"])
        runner_obj = state["runner"]
        if runner_obj is None:
            return _error(503, "warming_up", "model assets are still loading")

        try:
            decoded = {m: _decode_map(maps_doc[m]) for m in modalities}
        except Exception as exc:  # noqa: BLE001 - bad image payloads are a 400
            return _error(400, "bad_request", f"undecodable map: {exc}")

        if not jobs.acquire(blocking=False):
            return _error(429, "busy", f"job queue full (max {config.max_jobs})")
        try:
            job = SynthesisJob(
                prompt=doc["prompt"],
                text_guidance_scale=float(doc["text_guidance_scale"]),
                modalities=tuple(modalities),
                maps=decoded,
                weights=dict(doc.get("weights", {})),
                synthesis_seed=int(doc["synthesis_seed"]),
                output_px=int(doc["output_px"]),
                adapter_map=dict(config.adapter_map),
                device=config.device,
            )
            image = runner_obj(job)
        finally:
            jobs.release()

        if image.shape != (job.output_px, job.output_px, 3) or image.dtype != np.uint8:
            return _error(503, "model_unavailable", f"runner produced shape {image.shape}")
        return {
            "proto": PROTO_VERSION,
            "image": _encode_png(image),
            "backend_id": config.backend_id,
            "model_name": getattr(runner_obj, "model_name", "unknown"),
            "metadata": {
                "synthesis_seed": job.synthesis_seed,
                "text_guidance_scale": job.text_guidance_scale,
            },
        }

    return app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="synthsat-adapter")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8642)
    args = parser.parse_args(argv)
    import uvicorn

    uvicorn.run(create_app(config_from_env()), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
