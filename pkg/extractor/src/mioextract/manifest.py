"""Audio manifest: the CSV listing of clips to extract.

Format: header `clip_id,path,label`, one row per clip. Labels are
`bonafide`/`spoof` (0/1 also accepted). Paths are resolved relative to
the manifest file.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

LABELS = {"bonafide": 0, "spoof": 1, "0": 0, "1": 1}


@dataclass
class ManifestRow:
    clip_id: str
    path: Path
    label: int


def load_manifest(path) -> list[ManifestRow]:
    path = Path(path)
    rows = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["clip_id", "path", "label"]:
            raise ValueError(
                f"{path}: expected header clip_id,path,label, got {header}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{line_no}: malformed row {row!r}")
            clip_id, clip_path, label = row
            if clip_id in seen:
                raise ValueError(f"{path}:{line_no}: duplicate clip_id {clip_id!r}")
            seen.add(clip_id)
            if label not in LABELS:
                raise ValueError(
                    f"{path}:{line_no}: label must be bonafide or spoof, "
                    f"got {label!r}"
                )
            rows.append(ManifestRow(clip_id, path.parent / clip_path, LABELS[label]))
    if not rows:
        raise ValueError(f"{path}: manifest lists no clips")
    return rows
