"""Standalone MIOE v1 writer.

Implements the container format consumed by the benchmark engine:
magic "MIOE", version u16 = 1, flags u16 = 0, dim u32, count u64,
ptm_id and name as u16-length-prefixed UTF-8, split tag u8, then per
record clip_id (u16 length + UTF-8), label u8, and dim little-endian
float32 values. Deliberately independent of the engine's own code so
the two sides only meet at the byte level.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

SPLIT_CODES = {"unsplit": 0, "train": 1, "val": 2, "test": 3}


def _string(text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError(f"string too long for container ({len(raw)} bytes)")
    return struct.pack("<H", len(raw)) + raw


def write_mioe(path, name, ptm_id, dim, records, split_tag="unsplit") -> None:
    """records: iterable of (clip_id, label, float32 vector of length dim)."""
    records = list(records)
    seen = set()
    buf = bytearray()
    buf += b"MIOE"
    buf += struct.pack("<HHIQ", 1, 0, dim, len(records))
    buf += _string(ptm_id)
    buf += _string(name)
    buf += struct.pack("<B", SPLIT_CODES[split_tag])
    for clip_id, label, vector in records:
        if clip_id in seen:
            raise ValueError(f"duplicate clip_id {clip_id!r}")
        seen.add(clip_id)
        if label not in (0, 1):
            raise ValueError(f"clip {clip_id!r} has non-binary label {label}")
        vector = np.asarray(vector, dtype="<f4").reshape(-1)
        if vector.shape != (dim,):
            raise ValueError(
                f"clip {clip_id!r} vector has length {vector.shape[0]}, "
                f"expected {dim}"
            )
        if not np.all(np.isfinite(vector)):
            raise ValueError(f"clip {clip_id!r} vector has a non-finite entry")
        buf += _string(clip_id)
        buf += struct.pack("<B", label)
        buf += vector.tobytes()
    Path(path).write_bytes(bytes(buf))
