"""Offline audio-to-embedding extractor producing MIOE corpora."""

from .audio import load_clip_16k, resample_to_16k
from .backends import HuggingFaceBackend, StubBackend, make_backend
from .extract import ExtractionResult, extract
from .manifest import ManifestRow, load_manifest
from .mioe_writer import write_mioe
from .specs import PTM_SPECS, PtmSpec, get_spec

__version__ = "0.1.0"

__all__ = [
    "ExtractionResult",
    "HuggingFaceBackend",
    "ManifestRow",
    "PTM_SPECS",
    "PtmSpec",
    "StubBackend",
    "extract",
    "get_spec",
    "load_clip_16k",
    "load_manifest",
    "make_backend",
    "resample_to_16k",
    "write_mioe",
]
