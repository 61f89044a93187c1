"""Equal Error Rate and ROC computation over score sets.

Scores are spoof-class probabilities: higher means more spoof-like.
The EER estimator sweeps every observed score plus +inf as candidate
thresholds; at threshold t a bonafide clip with score >= t is a false
positive and a spoof clip with score < t is a false negative. The
reported operating point is the candidate minimizing |FPR - FNR| (ties
broken toward smaller FPR, then smaller threshold) and

    EER = (FPR + FNR) / 2  at that threshold.

This nearest-threshold midpoint convention is deterministic and exactly
checkable against a brute-force sweep; it differs from ROC interpolation
by less than the resolution of the reported tables once score sets reach
a few hundred entries.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .corpus import LABEL_BONAFIDE, LABEL_SPOOF


class ScoreSet:
    """Per-clip spoofness scores with ground-truth labels."""

    def __init__(self, clip_ids, labels, scores):
        self.clip_ids = list(clip_ids)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.scores = np.asarray(scores, dtype=np.float64)
        if not (len(self.clip_ids) == len(self.labels) == len(self.scores)):
            raise ValueError("clip_ids, labels and scores must have equal length")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("scores must be finite")
        if self.labels.size and not np.all(np.isin(self.labels, (0, 1))):
            raise ValueError("labels must be 0 (bonafide) or 1 (spoof)")

    def __len__(self):
        return len(self.clip_ids)

    def entries(self):
        for clip_id, label, score in zip(self.clip_ids, self.labels, self.scores):
            yield clip_id, int(label), float(score)

    def __eq__(self, other):
        if not isinstance(other, ScoreSet):
            return NotImplemented
        return (
            self.clip_ids == other.clip_ids
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.scores, other.scores)
        )

    def save_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["clip_id", "label", "score"])
            for clip_id, label, score in self.entries():
                writer.writerow([clip_id, label, repr(score)])

    @classmethod
    def load_csv(cls, path) -> "ScoreSet":
        clip_ids, labels, scores = [], [], []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["clip_id", "label", "score"]:
                raise ValueError(
                    f"{Path(path)}: expected header clip_id,label,score, got {header}"
                )
            for row in reader:
                if not row:
                    continue
                if len(row) != 3:
                    raise ValueError(f"{Path(path)}: malformed row {row!r}")
                clip_ids.append(row[0])
                labels.append(int(row[1]))
                scores.append(float(row[2]))
        return cls(clip_ids, labels, scores)


@dataclass
class EerResult:
    eer: float
    threshold: float
    fpr_at_threshold: float
    fnr_at_threshold: float


class RocPoint(NamedTuple):
    threshold: float
    fpr: float
    fnr: float


def _split_scores(scores: ScoreSet):
    bona = scores.scores[scores.labels == LABEL_BONAFIDE]
    spoof = scores.scores[scores.labels == LABEL_SPOOF]
    if bona.size == 0 or spoof.size == 0:
        raise ValueError(
            "EER needs at least one bonafide and one spoof entry "
            f"(got {bona.size} bonafide, {spoof.size} spoof)"
        )
    return np.sort(bona), np.sort(spoof)


def _candidate_rates(scores: ScoreSet):
    bona, spoof = _split_scores(scores)
    thresholds = np.unique(scores.scores)
    thresholds = np.append(thresholds, np.inf)
    # count of bonafide >= t is a false positive; spoof < t is a false negative
    fpr = (bona.size - np.searchsorted(bona, thresholds, side="left")) / bona.size
    fnr = np.searchsorted(spoof, thresholds, side="left") / spoof.size
    return thresholds, fpr, fnr


def compute_eer(scores: ScoreSet) -> EerResult:
    """EER at the candidate threshold where FPR and FNR come closest."""
    thresholds, fpr, fnr = _candidate_rates(scores)
    best = min(
        range(len(thresholds)),
        key=lambda j: (abs(fpr[j] - fnr[j]), fpr[j], thresholds[j]),
    )
    return EerResult(
        eer=(float(fpr[best]) + float(fnr[best])) / 2.0,
        threshold=float(thresholds[best]),
        fpr_at_threshold=float(fpr[best]),
        fnr_at_threshold=float(fnr[best]),
    )


def roc_points(scores: ScoreSet) -> list[RocPoint]:
    """(threshold, FPR, FNR) per candidate threshold, ascending in threshold."""
    thresholds, fpr, fnr = _candidate_rates(scores)
    return [
        RocPoint(float(t), float(p), float(n))
        for t, p, n in zip(thresholds, fpr, fnr)
    ]


def format_threshold(threshold: float) -> str:
    return "inf" if math.isinf(threshold) else repr(threshold)
