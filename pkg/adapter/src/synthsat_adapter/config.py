"""Adapter configuration: model identity, device, queue bound, modality map."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

PROTOCOL_MODALITIES = ("canny", "depth", "sketch", "color")

DEFAULT_ADAPTER_MAP = {
    "canny": "adapter_canny",
    "depth": "adapter_depth",
    "sketch": "adapter_sketch",
    "color": "adapter_color",
}


@dataclass(frozen=True)
class AdapterConfig:
    model: str = ""  # "pkg.module:factory" building a runner, or empty for the stub
    device: str = "cpu"
    max_jobs: int = 2
    max_output_px: int = 2048
    backend_id: str = "adapter"
    # protocol modality -> model-side adapter name; unmapped modalities are
    # excluded from the advertised capabilities and rejected with 422
    adapter_map: dict = field(default_factory=lambda: dict(DEFAULT_ADAPTER_MAP))
    assets_path: str = ""

    def capabilities_list(self) -> list[str]:
        return [m for m in PROTOCOL_MODALITIES if m in self.adapter_map]


def config_from_env() -> AdapterConfig:
    """Build a config from SYNTHSAT_ADAPTER_* environment variables."""
    mapping = dict(DEFAULT_ADAPTER_MAP)
    exclude = os.environ.get("SYNTHSAT_ADAPTER_EXCLUDE", "")
    for name in (m.strip() for m in exclude.split(",") if m.strip()):
        mapping.pop(name, None)
    return AdapterConfig(
        model=os.environ.get("SYNTHSAT_ADAPTER_MODEL", ""),
        device=os.environ.get("SYNTHSAT_ADAPTER_DEVICE", "cpu"),
        max_jobs=int(os.environ.get("SYNTHSAT_ADAPTER_MAX_JOBS", "2")),
        adapter_map=mapping,
        assets_path=os.environ.get("SYNTHSAT_ADAPTER_ASSETS", ""),
    )
