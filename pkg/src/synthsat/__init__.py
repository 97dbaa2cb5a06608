"""Synthetic overhead imagery of notional nuclear facilities.

Procedural scene generation, deterministic CPU rendering, control-map
extraction, pluggable multimodal synthesis, detail reinsertion and sensor
degradation, plus constellation revisit scheduling -- orchestrated per
scenario config into a reproducible dataset manifest.
"""

__version__ = "0.1.0"

PROTO_VERSION = 1
PROTO_HEADER = "x-synthsat-proto"
