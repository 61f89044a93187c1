"""Manifest-to-corpus extraction.

Per clip: decode, resample to 16 kHz mono, run the backend, check the
embedding dimension against the spec, and append to the output corpus in
manifest order. Undecodable clips are skipped with a logged reason and
recorded in a `<out>.rejects.json` sidecar; a dimension mismatch is
fatal because it means the wrong model variant is loaded.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import load_clip_16k
from .manifest import ManifestRow
from .mioe_writer import write_mioe
from .specs import PtmSpec

log = logging.getLogger("mioextract")


@dataclass
class ExtractionResult:
    out_path: Path
    written: int
    rejects: list[dict] = field(default_factory=list)

    @property
    def rejects_path(self) -> Path:
        return self.out_path.with_name(self.out_path.name + ".rejects.json")


def extract(manifest_rows: list[ManifestRow], spec: PtmSpec, out_path,
            backend, name: str | None = None) -> ExtractionResult:
    out_path = Path(out_path)
    records = []
    rejects = []
    for row in manifest_rows:
        try:
            waveform = load_clip_16k(row.path)
        except Exception as exc:
            reason = f"{type(exc).__name__}: {exc}"
            log.warning("skipping clip %s (%s): %s", row.clip_id, row.path, reason)
            rejects.append({
                "clip_id": row.clip_id,
                "path": str(row.path),
                "reason": reason,
            })
            continue
        vector = np.asarray(backend.embed(waveform, spec), dtype=np.float32)
        if vector.shape != (spec.dim,):
            raise RuntimeError(
                f"backend produced a {vector.shape} embedding for clip "
                f"{row.clip_id!r} but spec {spec.ptm_id!r} requires dim "
                f"{spec.dim}; wrong model variant?"
            )
        records.append((row.clip_id, row.label, vector))
    write_mioe(out_path, name or out_path.stem, spec.ptm_id, spec.dim, records)
    result = ExtractionResult(out_path, len(records), rejects)
    result.rejects_path.write_text(
        json.dumps(rejects, indent=2) + "\n", encoding="utf-8"
    )
    return result
