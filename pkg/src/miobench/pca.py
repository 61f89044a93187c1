"""PCA fit/apply for equalizing embedding dimensionality across corpora.

Fitting runs an SVD of the mean-centered data matrix and keeps the top-k
right singular vectors as components, ordered by descending explained
variance. Eigensolvers return arbitrary signs, so each component is
normalized to make its largest-magnitude entry non-negative (first such
entry on ties), which makes fits byte-reproducible. Transforms are fit on
training data only and applied unchanged everywhere else; fitting on
evaluation data would leak.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import EmbeddingCorpus, EmbeddingRecord

MIOP_MAGIC = b"MIOP"
MIOP_VERSION = 1

RANK_TOL = 1e-10


@dataclass
class PcaTransform:
    mean: np.ndarray  # [dim] float64
    components: np.ndarray  # [k, dim] float64, rows orthonormal
    explained_variance: np.ndarray  # [k] float64, non-increasing
    warnings: list[str] = field(default_factory=list)

    @property
    def dim(self):
        return self.components.shape[1]

    @property
    def k(self):
        return self.components.shape[0]

    def project(self, vectors):
        return (np.asarray(vectors, dtype=np.float64) - self.mean) @ self.components.T

    def reconstruct(self, projected):
        return np.asarray(projected, dtype=np.float64) @ self.components + self.mean


def fit_pca(corpus: EmbeddingCorpus, k: int) -> PcaTransform:
    """Fit a k-component transform on a corpus.

    Requires k <= min(dim, n - 1). Rank deficiency (fewer informative
    directions than k) is recorded as a warning on the transform, not an
    error.
    """
    n = len(corpus.records)
    if n < 2:
        raise ValueError(f"PCA needs at least 2 records, got {n}")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > min(corpus.dim, n - 1):
        raise ValueError(
            f"k={k} exceeds min(dim, n-1) = {min(corpus.dim, n - 1)} "
            f"(dim={corpus.dim}, n={n})"
        )
    x, _, _ = corpus.to_matrix()
    x = x.astype(np.float64)
    mean = x.mean(axis=0)
    centered = x - mean
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    variance = singular**2 / (n - 1)
    components = vt[:k].copy()
    for row in components:
        lead = np.argmax(np.abs(row))
        if row[lead] < 0:
            row *= -1
    warnings = []
    informative = int(np.sum(singular > RANK_TOL * max(singular[0], 1.0)))
    if informative < k:
        warnings.append(
            f"rank deficient: only {informative} informative directions for k={k}"
        )
    return PcaTransform(
        mean=mean,
        components=components,
        explained_variance=variance[:k].copy(),
        warnings=warnings,
    )


def apply_pca(transform: PcaTransform, corpus: EmbeddingCorpus) -> EmbeddingCorpus:
    """Project every record; clip ids, labels and order are preserved."""
    if corpus.dim != transform.dim:
        raise ValueError(
            f"corpus dim {corpus.dim} does not match transform dim {transform.dim}"
        )
    x, _, _ = corpus.to_matrix()
    projected = transform.project(x).astype(np.float32)
    records = [
        EmbeddingRecord(rec.clip_id, rec.label, projected[i])
        for i, rec in enumerate(corpus.records)
    ]
    return EmbeddingCorpus(
        name=corpus.name,
        ptm_id=f"{corpus.ptm_id}+pca{transform.k}",
        dim=transform.k,
        split_tag=corpus.split_tag,
        records=records,
    )


def save_pca(transform: PcaTransform, path) -> None:
    """MIOP v1: magic, version, JSON header, then float64 mean/components/variances."""
    header = json.dumps(
        {"dim": transform.dim, "k": transform.k, "warnings": transform.warnings},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    buf = bytearray()
    buf += MIOP_MAGIC
    buf += struct.pack("<HI", MIOP_VERSION, len(header))
    buf += header
    buf += transform.mean.astype("<f8").tobytes()
    buf += transform.components.astype("<f8").tobytes()
    buf += transform.explained_variance.astype("<f8").tobytes()
    Path(path).write_bytes(bytes(buf))


def load_pca(path) -> PcaTransform:
    data = Path(path).read_bytes()
    if data[:4] != MIOP_MAGIC:
        raise ValueError(f"{Path(path)}: bad transform magic {data[:4]!r}")
    version, header_len = struct.unpack_from("<HI", data, 4)
    if version != MIOP_VERSION:
        raise ValueError(f"{Path(path)}: unsupported transform version {version}")
    offset = 10
    header = json.loads(data[offset : offset + header_len].decode("utf-8"))
    offset += header_len
    dim, k = header["dim"], header["k"]
    mean = np.frombuffer(data, dtype="<f8", count=dim, offset=offset).copy()
    offset += 8 * dim
    components = (
        np.frombuffer(data, dtype="<f8", count=k * dim, offset=offset)
        .reshape(k, dim)
        .copy()
    )
    offset += 8 * k * dim
    variance = np.frombuffer(data, dtype="<f8", count=k, offset=offset).copy()
    offset += 8 * k
    if offset != len(data):
        raise ValueError(f"{Path(path)}: trailing bytes in transform file")
    return PcaTransform(mean, components, variance, list(header["warnings"]))
