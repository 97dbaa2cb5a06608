"""Model runners: the one seam between the protocol layer and a real model.

A runner is a callable taking a SynthesisJob and returning an RGB uint8
array of job.output_px squared, plus a `model_name` attribute.  The
protocol layer holds no model logic at all; production deployments point
`AdapterConfig.model` at a factory ("package.module:build") that wraps a
multimodally-guided diffusion pipeline, seeds its sampler from
job.synthesis_seed, and feeds each guidance map through the adapter named
in job.adapter_map.
"""

from __future__ import annotations

import importlib
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SynthesisJob:
    prompt: str
    text_guidance_scale: float
    modalities: tuple
    maps: dict  # modality -> np.ndarray (decoded)
    weights: dict
    synthesis_seed: int
    output_px: int
    adapter_map: dict
    device: str


class StubRunner:
    """Deterministic stand-in used by tests and asset-free environments.

    Not a model: it hashes the seed into a smooth field and stamps in the
    guidance maps so outputs are visibly request-dependent and exactly
    reproducible for a given seed.
    """

    model_name = "stub-diffusion/0"

    def __call__(self, job: SynthesisJob) -> np.ndarray:
        px = job.output_px
        rng = np.random.Generator(np.random.PCG64(job.synthesis_seed))
        coarse = rng.random((8, 8))
        reps = (px + 7) // 8
        field = np.kron(coarse, np.ones((reps, reps)))[:px, :px]
        rgb = np.stack([field * 0.9, field * 0.8, field * 0.6], axis=-1)
        for m in job.modalities:
            arr = job.maps[m].astype(np.float64)
            if arr.ndim == 3:
                arr = arr.mean(axis=2)
            h, w = arr.shape
            rows = np.minimum((np.arange(px) * h) // px, h - 1)
            cols = np.minimum((np.arange(px) * w) // px, w - 1)
            resized = arr[rows][:, cols] / 255.0
            weight = float(job.weights.get(m, 1.0))
            rgb = rgb * (1.0 - 0.2 * weight) + 0.2 * weight * resized[..., None]
        return np.floor(np.clip(rgb, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def load_runner(config):
    """Build the configured runner; empty model string selects the stub."""
    if not config.model:
        return StubRunner()
    module_name, _, attr = config.model.partition(":")
    if not attr:
        raise RuntimeError(
            f"model must look like 'package.module:factory', got {config.model!r}"
        )
    try:
        module = importlib.import_module(module_name)
        factory = getattr(module, attr)
    except (ImportError, AttributeError) as exc:
        raise RuntimeError(
            f"cannot load model factory {config.model!r}: {exc}. "
            "Install the model package and set SYNTHSAT_ADAPTER_ASSETS to the "
            "local weights path."
        ) from exc
    return factory(config)
