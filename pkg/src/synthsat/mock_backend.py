"""Deterministic mock synthesis backend and its HTTP server.

The mock is a pure function of the wire request: a seeded 4-octave value
noise field mapped through an earth-tone ramp, modulated by whichever
guidance maps are present (brightness from depth, a 50/50 tint from the
color blocks, darkened strokes under canny/sketch edges).  Identical
requests produce identical bytes on any host, which is what makes
end-to-end pipeline tests pin digests.
"""

from __future__ import annotations

import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from . import PROTO_HEADER, PROTO_VERSION
from .control import resize_nearest
from .errors import ProtocolError
from .imageio import png_b64_decode, png_b64_encode
from .noise import value_noise
from .seeds import derive_seed

BACKEND_ID = "mock"
MODEL_NAME = "synthsat-mock/1"
CAPABILITY_MODALITIES = ("canny", "depth", "sketch", "color")
MAX_OUTPUT_PX = 2048

_RAMP_LO = np.array([0.24, 0.30, 0.20])
_RAMP_HI = np.array([0.55, 0.52, 0.42])


def capabilities() -> dict:
    return {
        "proto": PROTO_VERSION,
        "modalities": list(CAPABILITY_MODALITIES),
        "backend_id": BACKEND_ID,
        "model_name": MODEL_NAME,
        "max_output_px": MAX_OUTPUT_PX,
    }


def _error(status: int, code: str, message: str) -> tuple[int, dict]:
    return status, {"error": {"code": code, "message": message}}


def validate_wire_request(doc) -> tuple[int, dict] | None:
    """Schema check per docs/protocol.md; None when the request is acceptable."""
    if not isinstance(doc, dict):
        return _error(400, "bad_request", "body must be a JSON object")
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
    if not isinstance(px, int) or isinstance(px, bool) or px < 1 or px > MAX_OUTPUT_PX:
        problems.append(f"output_px must be an integer in [1, {MAX_OUTPUT_PX}]")
    mods = doc.get("modalities")
    maps = doc.get("maps", {})
    if not isinstance(mods, list):
        problems.append("modalities must be a list")
        mods = []
    if not isinstance(maps, dict):
        problems.append("maps must be an object")
        maps = {}
    weights = doc.get("weights", {})
    if not isinstance(weights, dict):
        problems.append("weights must be an object")
    else:
        for m, w in weights.items():
            if not isinstance(w, (int, float)) or isinstance(w, bool) or not (0.0 <= w <= 2.0):
                problems.append(f"weight for {m!r} must be in [0,2]")
    for m in mods:
        if m not in CAPABILITY_MODALITIES:
            return _error(422, "unsupported_modality", f"modality {m!r} not in capabilities")
        if m not in maps:
            problems.append(f"modality {m!r} has no map")
    if problems:
        return _error(400, "bad_request", "; ".join(problems))
    return None


def synthesize_pixels(doc: dict) -> np.ndarray:
    """Deterministic mock image for a validated wire request."""
    px = int(doc["output_px"])
    mods = list(doc["modalities"])
    seed = int(doc["synthesis_seed"])
    fld = value_noise(px, derive_seed(seed, "mock_base"), octaves=4, persistence=0.5)
    rgb = _RAMP_LO[None, None, :] + fld[..., None] * (_RAMP_HI - _RAMP_LO)[None, None, :]

    decoded = {}
    for m in mods:
        arr = png_b64_decode(doc["maps"][m])
        decoded[m] = resize_nearest(arr, px, px)

    if "depth" in decoded:
        depth = decoded["depth"].astype(np.float64)
        if depth.ndim == 3:
            depth = depth.mean(axis=2)
        rgb = rgb * (0.6 + 0.4 * depth / 255.0)[..., None]
    if "color" in decoded:
        tint = decoded["color"].astype(np.float64)
        if tint.ndim == 2:
            tint = np.repeat(tint[..., None], 3, axis=2)
        rgb = 0.5 * rgb + 0.5 * tint / 255.0
    if "canny" in decoded:
        edges = decoded["canny"]
        if edges.ndim == 3:
            edges = edges[..., 0]
        rgb = np.where((edges > 127)[..., None], rgb * 0.55, rgb)
    if "sketch" in decoded:
        strokes = decoded["sketch"]
        if strokes.ndim == 3:
            strokes = strokes[..., 0]
        rgb = np.where((strokes > 127)[..., None], rgb * 0.75, rgb)

    return np.floor(np.clip(rgb, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def mock_respond(doc) -> tuple[int, dict]:
    """Full mock handling of a parsed request body: (status, response dict)."""
    bad = validate_wire_request(doc)
    if bad is not None:
        return bad
    try:
        image = synthesize_pixels(doc)
    except ProtocolError as exc:
        return _error(400, "bad_request", str(exc))
    return 200, {
        "proto": PROTO_VERSION,
        "image": png_b64_encode(image),
        "backend_id": BACKEND_ID,
        "model_name": MODEL_NAME,
        "metadata": {
            "synthesis_seed": int(doc["synthesis_seed"]),
            "text_guidance_scale": float(doc["text_guidance_scale"]),
        },
    }


class _MockHandler(BaseHTTPRequestHandler):
    server_version = "synthsat-mock/1"

    def _send(self, status: int, doc: dict) -> None:
        body = json.dumps(doc).encode("utf-8")
        self.send_response(status)
        self.send_header("content-type", "application/json")
        self.send_header("content-length", str(len(body)))
        self.send_header(PROTO_HEADER, str(PROTO_VERSION))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/v1/capabilities":
            self._send(200, capabilities())
        else:
            self._send(*_error(404, "not_found", f"no such path {self.path}"))

    def do_POST(self):
        if self.path != "/v1/synthesize":
            self._send(*_error(404, "not_found", f"no such path {self.path}"))
            return
        if self.headers.get(PROTO_HEADER) != str(PROTO_VERSION):
            self._send(*_error(400, "bad_proto", f"{PROTO_HEADER} header must be {PROTO_VERSION}"))
            return
        try:
            length = int(self.headers.get("content-length", "0"))
            raw = self.rfile.read(length)
            doc = json.loads(raw.decode("utf-8"))
        except (ValueError, UnicodeDecodeError) as exc:
            self._send(*_error(400, "malformed_json", str(exc)))
            return
        self._send(*mock_respond(doc))

    def log_message(self, fmt, *args):  # silence per-request stderr noise
        pass


def make_mock_server(port: int = 0, host: str = "127.0.0.1") -> ThreadingHTTPServer:
    return ThreadingHTTPServer((host, port), _MockHandler)


def serve_mock(port: int, host: str = "127.0.0.1") -> None:
    server = make_mock_server(port, host)
    print(f"mock synthesis backend listening on http://{host}:{server.server_address[1]}")
    try:
        server.serve_forever()
    finally:
        server.server_close()
