"""Reference synthesis-protocol adapter around a real guided diffusion model."""

__version__ = "0.1.0"

PROTO_VERSION = 1
PROTO_HEADER = "x-synthsat-proto"
