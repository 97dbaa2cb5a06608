"""Synthesis requests: prompts, modality combinations, and the wire client.

The wire protocol (documented in docs/protocol.md) is HTTP POST
/v1/synthesize with a JSON body carrying the prompt, guidance scales, seed
and base64-PNG guidance maps, versioned by the `x-synthsat-proto` header.
The endpoint string "mock" routes requests to the in-process deterministic
backend so batch runs never require a model service.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import requests as _requests

from . import PROTO_HEADER, PROTO_VERSION
from .canonical import digest_of, image_digest
from .control import ControlBundle
from .errors import BackendUnavailable, ProtocolError, ValidationError
from .imageio import png_b64_decode, png_b64_encode

MODALITIES = ("canny", "depth", "sketch", "color")

GUIDANCE_SCALE_DEFAULT = 10.0
GUIDANCE_SCALE_HIGH = 15.0

PROMPT_BASE = "Satellite image of a nuclear power plant"
SEASONS = ("spring", "summer", "fall", "winter")
ENVIRONMENT_PHRASES = {
    "forest": "in a forest",
    "desert": "in the desert",
    "coastline": "by a coastline",
    "mountains": "in the mountains",
}

DEFAULT_TIMEOUT_S = 30.0
RETRY_BACKOFF_S = (1.0, 2.0, 4.0)
DEFAULT_MAX_IN_FLIGHT = 4


@dataclass(frozen=True)
class PromptSpec:
    season: str | None = None
    environment: str | None = None

    def __post_init__(self):
        if self.season is not None and self.season not in SEASONS:
            raise ValidationError(f"season must be one of {SEASONS}, got {self.season!r}")
        if self.environment is not None and self.environment not in ENVIRONMENT_PHRASES:
            raise ValidationError(
                f"environment must be one of {sorted(ENVIRONMENT_PHRASES)}, got {self.environment!r}"
            )


def render_prompt(spec: PromptSpec) -> str:
    parts = [PROMPT_BASE]
    if spec.season is not None:
        parts.append(f"in {spec.season}")
    if spec.environment is not None:
        parts.append(ENVIRONMENT_PHRASES[spec.environment])
    return " ".join(parts)


@dataclass(frozen=True)
class SynthesisRequest:
    modalities: tuple[str, ...]
    maps: dict
    prompt: str
    synthesis_seed: int
    output_px: int
    text_guidance_scale: float = GUIDANCE_SCALE_DEFAULT
    weights: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SynthesisResult:
    image: np.ndarray
    backend_id: str
    latency_ms: float
    request_digest: str


def validate_request(req: SynthesisRequest) -> None:
    """Raise ValidationError listing every problem; nothing is sent on failure."""
    problems = []
    if not req.prompt:
        problems.append("prompt must be non-empty")
    if req.text_guidance_scale <= 0:
        problems.append(f"text_guidance_scale must be > 0, got {req.text_guidance_scale}")
    if req.output_px < 1:
        problems.append(f"output_px must be >= 1, got {req.output_px}")
    for m in req.modalities:
        if m not in MODALITIES:
            problems.append(f"unknown modality {m!r}")
        elif m not in req.maps:
            problems.append(f"modality {m!r} has no map")
    shapes = {m: req.maps[m].shape[:2] for m in req.modalities if m in req.maps}
    if len(set(shapes.values())) > 1:
        problems.append(f"maps must share resolution, got {shapes}")
    for m, w in req.weights.items():
        if not (0.0 <= w <= 2.0):
            problems.append(f"weight for {m!r} must be in [0,2], got {w}")
    if problems:
        raise ValidationError(problems)


def request_digest(req: SynthesisRequest) -> str:
    """Digest of the canonical serialization; maps referenced by pixel digest."""
    doc = {
        "prompt": req.prompt,
        "text_guidance_scale": float(req.text_guidance_scale),
        "modalities": list(req.modalities),
        "map_digests": {m: image_digest(req.maps[m]) for m in req.modalities},
        "weights": {m: float(req.weights.get(m, 1.0)) for m in req.modalities},
        "synthesis_seed": int(req.synthesis_seed),
        "output_px": int(req.output_px),
    }
    return digest_of(doc)


def request_to_wire(req: SynthesisRequest) -> dict:
    return {
        "prompt": req.prompt,
        "text_guidance_scale": float(req.text_guidance_scale),
        "modalities": list(req.modalities),
        "maps": {m: png_b64_encode(req.maps[m]) for m in req.modalities},
        "weights": {m: float(req.weights.get(m, 1.0)) for m in req.modalities},
        "synthesis_seed": int(req.synthesis_seed),
        "output_px": int(req.output_px),
    }


def enumerate_combinations(
    bundle: ControlBundle,
    prompt: str,
    synthesis_seed: int,
    output_px: int | None = None,
    text_guidance_scale: float = GUIDANCE_SCALE_DEFAULT,
    weights: dict | None = None,
) -> list[SynthesisRequest]:
    """All 16 modality subsets in binary counting order (bit 0 = canny)."""
    maps_all = {
        "canny": bundle.canny,
        "depth": bundle.depth8,
        "sketch": bundle.sketch,
        "color": bundle.color_blocks,
    }
    px = output_px if output_px is not None else bundle.resolution()[0]
    out = []
    for index in range(2 ** len(MODALITIES)):
        mods = tuple(m for k, m in enumerate(MODALITIES) if index >> k & 1)
        out.append(
            SynthesisRequest(
                modalities=mods,
                maps={m: maps_all[m] for m in mods},
                prompt=prompt,
                synthesis_seed=synthesis_seed,
                output_px=px,
                text_guidance_scale=text_guidance_scale,
                weights=dict(weights or {}),
            )
        )
    return out


def _parse_response(doc: dict, req: SynthesisRequest) -> tuple[np.ndarray, str]:
    if not isinstance(doc, dict) or "image" not in doc:
        raise ProtocolError("response missing 'image'")
    image = png_b64_decode(doc["image"])
    if image.ndim != 3 or image.shape[2] != 3:
        raise ProtocolError(f"response image must be RGB, got shape {image.shape}")
    if image.shape[0] != req.output_px or image.shape[1] != req.output_px:
        raise ProtocolError(
            f"expected {req.output_px}x{req.output_px} image, "
            f"got {image.shape[0]}x{image.shape[1]}"
        )
    backend_id = doc.get("backend_id")
    if not isinstance(backend_id, str) or not backend_id:
        raise ProtocolError("response missing 'backend_id'")
    return image, backend_id


def synthesize(
    req: SynthesisRequest,
    backend: str,
    timeout: float = DEFAULT_TIMEOUT_S,
    backoff=RETRY_BACKOFF_S,
    sleep=time.sleep,
) -> SynthesisResult:
    """Send one request to `backend` ("mock" or an HTTP URL), with retries."""
    validate_request(req)
    digest = request_digest(req)
    wire = request_to_wire(req)
    start = time.monotonic()

    if backend == "mock" or backend.startswith("mock:"):
        from .mock_backend import mock_respond

        status, doc = mock_respond(wire)
        if status != 200:
            raise ProtocolError(f"mock backend rejected request: {doc}")
        image, backend_id = _parse_response(doc, req)
        return SynthesisResult(
            image=image,
            backend_id=backend_id,
            latency_ms=(time.monotonic() - start) * 1000.0,
            request_digest=digest,
        )

    url = backend.rstrip("/") + "/v1/synthesize"
    headers = {PROTO_HEADER: str(PROTO_VERSION)}
    last_error = None
    for attempt in range(len(backoff) + 1):
        try:
            resp = _requests.post(url, json=wire, headers=headers, timeout=timeout)
        except _requests.RequestException as exc:
            last_error = exc
        else:
            if resp.status_code == 200:
                try:
                    doc = resp.json()
                except ValueError as exc:
                    raise ProtocolError(f"non-JSON response: {exc}") from exc
                image, backend_id = _parse_response(doc, req)
                return SynthesisResult(
                    image=image,
                    backend_id=backend_id,
                    latency_ms=(time.monotonic() - start) * 1000.0,
                    request_digest=digest,
                )
            if resp.status_code in (429, 503):
                last_error = BackendUnavailable(f"backend busy: HTTP {resp.status_code}")
            else:
                raise ProtocolError(f"backend returned HTTP {resp.status_code}: {resp.text[:200]}")
        if attempt < len(backoff):
            sleep(backoff[attempt])
    raise BackendUnavailable(f"backend unreachable after {len(backoff) + 1} attempts: {last_error}")


def synthesize_batch(
    requests_list,
    backend: str,
    max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
    timeout: float = DEFAULT_TIMEOUT_S,
    backoff=RETRY_BACKOFF_S,
    sleep=time.sleep,
) -> list[SynthesisResult]:
    """Synthesize many requests with bounded concurrency, results in order."""
    if not requests_list:
        return []
    if max_in_flight <= 1 or len(requests_list) == 1:
        return [synthesize(r, backend, timeout, backoff, sleep) for r in requests_list]
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(
            pool.map(lambda r: synthesize(r, backend, timeout, backoff, sleep), requests_list)
        )
