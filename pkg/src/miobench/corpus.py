"""Embedding corpus model and MIOE container I/O.

A corpus is a named collection of fixed-dimension float32 embedding
vectors with binary labels (0 = bonafide, 1 = spoof). Corpora are stored
in the MIOE v1 binary container:

    magic    4 bytes   b"MIOE"
    version  u16       1
    flags    u16       0
    dim      u32
    count    u64
    ptm_id   u16 length + UTF-8 bytes
    name     u16 length + UTF-8 bytes
    split    u8        0 unsplit, 1 train, 2 val, 3 test
    records  count times:
        clip_id  u16 length + UTF-8 bytes
        label    u8  0 or 1
        vector   dim little-endian float32

All integers are little-endian. Saving is byte-deterministic: the same
corpus always produces the same file. A corpus is immutable once built
and safe for concurrent reads.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

MIOE_MAGIC = b"MIOE"
MIOE_VERSION = 1

LABEL_BONAFIDE = 0
LABEL_SPOOF = 1

SPLIT_TAGS = ("unsplit", "train", "val", "test")
_SPLIT_CODE = {tag: code for code, tag in enumerate(SPLIT_TAGS)}


class MioeError(ValueError):
    """Malformed MIOE file. `offset` is the byte position of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass
class EmbeddingRecord:
    clip_id: str
    label: int
    vector: np.ndarray

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float32).reshape(-1)

    def __eq__(self, other):
        if not isinstance(other, EmbeddingRecord):
            return NotImplemented
        return (
            self.clip_id == other.clip_id
            and self.label == other.label
            and np.array_equal(self.vector, other.vector)
        )


@dataclass
class EmbeddingCorpus:
    name: str
    ptm_id: str
    dim: int
    split_tag: str = "unsplit"
    records: list[EmbeddingRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __eq__(self, other):
        if not isinstance(other, EmbeddingCorpus):
            return NotImplemented
        return (
            self.name == other.name
            and self.ptm_id == other.ptm_id
            and self.dim == other.dim
            and self.split_tag == other.split_tag
            and self.records == other.records
        )

    def label_counts(self):
        counts = {LABEL_BONAFIDE: 0, LABEL_SPOOF: 0}
        for rec in self.records:
            counts[rec.label] = counts.get(rec.label, 0) + 1
        return counts

    def has_both_labels(self):
        counts = self.label_counts()
        return counts[LABEL_BONAFIDE] > 0 and counts[LABEL_SPOOF] > 0

    def validate(self):
        """Check structural invariants, raising ValueError on the first failure."""
        if self.dim < 1:
            raise ValueError(f"corpus dim must be positive, got {self.dim}")
        if self.split_tag not in _SPLIT_CODE:
            raise ValueError(f"unknown split tag {self.split_tag!r}")
        seen = set()
        for rec in self.records:
            if rec.clip_id in seen:
                raise ValueError(f"duplicate clip_id {rec.clip_id!r}")
            seen.add(rec.clip_id)
            if rec.label not in (LABEL_BONAFIDE, LABEL_SPOOF):
                raise ValueError(
                    f"clip {rec.clip_id!r} has non-binary label {rec.label}"
                )
            if rec.vector.shape != (self.dim,):
                raise ValueError(
                    f"clip {rec.clip_id!r} has vector length {rec.vector.shape[0]}, "
                    f"corpus dim is {self.dim}"
                )
            if not np.all(np.isfinite(rec.vector)):
                raise ValueError(f"clip {rec.clip_id!r} has a non-finite vector entry")

    def to_matrix(self):
        """Return (vectors [n, dim] float32, labels [n] int64, clip_ids)."""
        n = len(self.records)
        x = np.empty((n, self.dim), dtype=np.float32)
        y = np.empty(n, dtype=np.int64)
        ids = []
        for i, rec in enumerate(self.records):
            x[i] = rec.vector
            y[i] = rec.label
            ids.append(rec.clip_id)
        return x, y, ids


@dataclass
class SplitSpec:
    fractions: tuple[float, float, float] = (0.7, 0.1, 0.2)
    seed: int = 0

    def validate(self):
        if len(self.fractions) != 3:
            raise ValueError("fractions must be a (train, val, test) triple")
        for f in self.fractions:
            if not 0.0 <= f <= 1.0:
                raise ValueError(f"fraction {f} outside [0, 1]")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError(f"fractions sum to {sum(self.fractions)}, expected 1")


def _write_string(buf, text):
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError(f"string too long for container ({len(raw)} bytes)")
    buf += struct.pack("<H", len(raw))
    buf += raw


def save_corpus(corpus: EmbeddingCorpus, path) -> None:
    """Write `corpus` to `path` in MIOE v1. Byte-deterministic."""
    corpus.validate()
    buf = bytearray()
    buf += MIOE_MAGIC
    buf += struct.pack("<HHIQ", MIOE_VERSION, 0, corpus.dim, len(corpus.records))
    _write_string(buf, corpus.ptm_id)
    _write_string(buf, corpus.name)
    buf += struct.pack("<B", _SPLIT_CODE[corpus.split_tag])
    for rec in corpus.records:
        _write_string(buf, rec.clip_id)
        buf += struct.pack("<B", rec.label)
        buf += rec.vector.astype("<f4", copy=False).tobytes()
    Path(path).write_bytes(bytes(buf))


class _Reader:
    def __init__(self, data):
        self.data = data
        self.offset = 0

    def take(self, n, what):
        if self.offset + n > len(self.data):
            raise MioeError(f"file truncated while reading {what}", len(self.data))
        chunk = self.data[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt, what):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size, what))

    def string(self, what):
        at = self.offset
        (length,) = self.unpack("<H", f"{what} length")
        raw = self.take(length, what)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            raise MioeError(f"{what} is not valid UTF-8", at) from None


def load_corpus(path) -> EmbeddingCorpus:
    """Read a MIOE v1 file, validating every invariant as it parses.

    Errors carry the byte offset of the offending field.
    """
    data = Path(path).read_bytes()
    r = _Reader(data)
    if r.take(4, "magic") != MIOE_MAGIC:
        raise MioeError(f"bad magic {data[:4]!r}, expected {MIOE_MAGIC!r}", 0)
    at = r.offset
    (version,) = r.unpack("<H", "version")
    if version != MIOE_VERSION:
        raise MioeError(f"unsupported version {version}", at)
    at = r.offset
    (flags,) = r.unpack("<H", "flags")
    if flags != 0:
        raise MioeError(f"unsupported flags 0x{flags:04x}", at)
    at = r.offset
    (dim,) = r.unpack("<I", "dim")
    if dim < 1:
        raise MioeError("dim must be positive", at)
    (count,) = r.unpack("<Q", "count")
    ptm_id = r.string("ptm_id")
    name = r.string("name")
    at = r.offset
    (split_code,) = r.unpack("<B", "split tag")
    if split_code >= len(SPLIT_TAGS):
        raise MioeError(f"unknown split tag code {split_code}", at)

    records = []
    seen = set()
    for i in range(count):
        record_at = r.offset
        if r.offset >= len(data):
            raise MioeError(
                f"declared count {count} but file ends after {i} records",
                len(data),
            )
        clip_id = r.string(f"clip_id of record {i}")
        if clip_id in seen:
            raise MioeError(f"duplicate clip_id {clip_id!r}", record_at)
        seen.add(clip_id)
        at = r.offset
        (label,) = r.unpack("<B", f"label of clip {clip_id!r}")
        if label not in (LABEL_BONAFIDE, LABEL_SPOOF):
            raise MioeError(
                f"clip {clip_id!r} has non-binary label {label}; "
                "only bonafide (0) and spoof (1) are supported",
                at,
            )
        at = r.offset
        raw = r.take(4 * dim, f"vector of clip {clip_id!r}")
        vector = np.frombuffer(raw, dtype="<f4").copy()
        if not np.all(np.isfinite(vector)):
            raise MioeError(f"clip {clip_id!r} has a non-finite vector entry", at)
        records.append(EmbeddingRecord(clip_id, int(label), vector))

    if r.offset != len(data):
        raise MioeError(
            f"declared count {count} but {len(data) - r.offset} trailing bytes remain",
            r.offset,
        )
    return EmbeddingCorpus(
        name=name,
        ptm_id=ptm_id,
        dim=dim,
        split_tag=SPLIT_TAGS[split_code],
        records=records,
    )


def partition_sizes(n: int, fractions) -> tuple[int, int, int]:
    """Partition counts: floor(n*f_train), floor(n*f_val), remainder to test.

    Fractions are interpreted by their decimal value, so floor(10 * 0.7)
    is 7 rather than falling victim to binary rounding of 0.7.
    """
    f_train, f_val, _ = fractions
    n_train = math.floor(Fraction(n) * Fraction(str(f_train)))
    n_val = math.floor(Fraction(n) * Fraction(str(f_val)))
    return n_train, n_val, n - n_train - n_val


def split_corpus(corpus: EmbeddingCorpus, spec: SplitSpec):
    """Shuffle with the split seed, then cut train/val/test by the floor rule."""
    spec.validate()
    n = len(corpus.records)
    if n < 3:
        raise ValueError(f"need at least 3 records to split, got {n}")
    n_train, n_val, n_test = partition_sizes(n, spec.fractions)
    if n_train == 0:
        raise ValueError("split spec produces an empty training set")
    perm = np.random.default_rng(spec.seed).permutation(n)

    def take(indices, tag):
        return EmbeddingCorpus(
            name=corpus.name,
            ptm_id=corpus.ptm_id,
            dim=corpus.dim,
            split_tag=tag,
            records=[corpus.records[int(j)] for j in indices],
        )

    return (
        take(perm[:n_train], "train"),
        take(perm[n_train : n_train + n_val], "val"),
        take(perm[n_train + n_val :], "test"),
    )


def synthesize_corpus(
    dim: int,
    n_per_class: int,
    separation: float,
    seed: int,
    name: str = "synthetic",
    ptm_id: str = "synthetic",
) -> EmbeddingCorpus:
    """Two-Gaussian synthetic corpus for desk-scale experiments.

    Bonafide vectors are drawn from an isotropic unit-variance Gaussian at
    the origin; spoof vectors come from the same distribution shifted by
    `separation` along a seeded random unit direction. Fully deterministic
    for a given seed; bonafide records come first.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    if separation < 0:
        raise ValueError("separation must be non-negative")
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)
    bona = rng.normal(size=(n_per_class, dim))
    spoof = rng.normal(size=(n_per_class, dim)) + separation * direction
    records = [
        EmbeddingRecord(f"bona-{i:05d}", LABEL_BONAFIDE, bona[i])
        for i in range(n_per_class)
    ]
    records += [
        EmbeddingRecord(f"spoof-{i:05d}", LABEL_SPOOF, spoof[i])
        for i in range(n_per_class)
    ]
    return EmbeddingCorpus(name=name, ptm_id=ptm_id, dim=dim, records=records)


def synthesize_complementary_pair(
    dim: int,
    n_per_class: int,
    separation: float,
    seed: int,
):
    """Two corpora over the same clips where each separates half the spoofs.

    Corpus A shifts even-indexed spoof clips away from the bonafide cloud,
    corpus B shifts the odd-indexed ones; every spoof clip is separable in
    exactly one of the two feature spaces. A classifier using one corpus
    alone is blind to half the spoofs, while the pair together is fully
    separable, which makes this the canonical check that fusing two
    representations can beat either on its own.
    """
    rng = np.random.default_rng(seed)
    dir_a = rng.normal(size=dim)
    dir_a /= np.linalg.norm(dir_a)
    dir_b = rng.normal(size=dim)
    dir_b /= np.linalg.norm(dir_b)

    def build(tag, direction, shift_parity):
        bona = rng.normal(size=(n_per_class, dim))
        spoof = rng.normal(size=(n_per_class, dim))
        for i in range(n_per_class):
            if i % 2 == shift_parity:
                spoof[i] += separation * direction
        records = [
            EmbeddingRecord(f"bona-{i:05d}", LABEL_BONAFIDE, bona[i])
            for i in range(n_per_class)
        ]
        records += [
            EmbeddingRecord(f"spoof-{i:05d}", LABEL_SPOOF, spoof[i])
            for i in range(n_per_class)
        ]
        return EmbeddingCorpus(
            name=f"complementary-{tag}",
            ptm_id=f"synthetic-{tag}",
            dim=dim,
            records=records,
        )

    return build("a", dir_a, 0), build("b", dir_b, 1)


@dataclass
class AlignedPair:
    clip_id: str
    vector_a: np.ndarray
    vector_b: np.ndarray
    label: int


def align_pair(a: EmbeddingCorpus, b: EmbeddingCorpus) -> list[AlignedPair]:
    """Pair up records shared by clip_id, ordered by `a`'s record order.

    Raises if any shared clip carries conflicting labels, or if the two
    corpora share no clips at all.
    """
    b_by_id = {rec.clip_id: rec for rec in b.records}
    pairs = []
    for rec in a.records:
        other = b_by_id.get(rec.clip_id)
        if other is None:
            continue
        if other.label != rec.label:
            raise ValueError(
                f"label conflict for clip {rec.clip_id!r}: "
                f"{rec.label} in {a.name!r} vs {other.label} in {b.name!r}"
            )
        pairs.append(AlignedPair(rec.clip_id, rec.vector, other.vector, rec.label))
    if not pairs:
        raise ValueError(
            f"corpora {a.name!r} and {b.name!r} share no clip_ids; nothing to fuse"
        )
    return pairs
