"""Declarative experiment runner and report rendering.

Four experiment modes over MIOE corpora:

  single_fcn / single_cnn   one probe per (dataset, PTM), test-split EER
  fusion_grid               one fusion model per (PTM pair, dataset)
  cross_corpus              PCA-matched train-on-one, test-on-the-others

A dataset entry either provides explicit train/val/test files or a single
"unsplit" file. Unsplit datasets are split 70/10/20 per configured seed
and averaged across seeds in the single and fusion modes; cross-corpus
mode uses the first seed only. Experiment cells are independent, may run
concurrently (bounded by the config worker count and the MIO_WORKERS
environment variable), and a failing cell is reported as FAILED without
touching the others. Reports carry no timestamps, so identical configs
and corpora reproduce byte-identical payloads.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import (
    AlignedPair,
    EmbeddingCorpus,
    EmbeddingRecord,
    SplitSpec,
    align_pair,
    load_corpus,
    partition_sizes,
    split_corpus,
)
from .fusion import score_mio, train_mio
from .metrics import compute_eer
from .nn import TrainingHyper
from .probes import score, train_probe
from .pca import apply_pca, fit_pca
from .version import ENGINE_VERSION

MODES = ("single_fcn", "single_cnn", "fusion_grid", "cross_corpus")

DEFAULT_ITW_SEEDS = [1, 2, 3, 4, 5]
DEFAULT_FRACTIONS = (0.7, 0.1, 0.2)
DEFAULT_MODEL = {
    "hidden_dim": 128,
    "filters": 32,
    "kernel": 3,
    "pool": 2,
    "proj_dim": 120,
    "head_hidden": 256,
}

REFERENCE_LABEL = "paper-reported, not recomputed"
REFERENCE_ROWS = [
    {"model": "MiO(XLS-R + x-vector)", "dataset": "ASV", "eer_percent": 0.41},
    {"model": "MiO(XLS-R + x-vector)", "dataset": "ITW", "eer_percent": 0.07},
    {"model": "MiO(XLS-R + Whisper)", "dataset": "D-E", "eer_percent": 0.04},
]
REFERENCE_NOTE = (
    "These rows quote previously published results for context and are not "
    "computed by this engine. The same publication's fusion grid lists "
    "XLS-R + Whisper on D-E as 0.05; its model comparison table reports "
    "0.04, which is the value quoted here."
)

REPORT_SCHEMA_ID = "miobench-report-v1"

REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["schema", "provenance", "rows", "reference_rows"],
    "properties": {
        "schema": {"const": REPORT_SCHEMA_ID},
        "provenance": {
            "type": "object",
            "required": ["engine_version", "config_hash", "mode"],
            "properties": {
                "engine_version": {"type": "string"},
                "config_hash": {"type": "string"},
                "mode": {"enum": list(MODES)},
                "hyper": {"type": "object"},
                "itw_seeds": {"type": "array", "items": {"type": "integer"}},
                "split_fractions": {"type": "array"},
                "pca_fit_scope": {"type": "string"},
                "config": {"type": "object"},
            },
        },
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["cell_id", "mode", "status"],
                "properties": {
                    "cell_id": {"type": "string"},
                    "mode": {"enum": list(MODES)},
                    "dataset": {"type": ["string", "null"]},
                    "target": {"type": ["string", "null"]},
                    "ptm_a": {"type": ["string", "null"]},
                    "ptm_b": {"type": ["string", "null"]},
                    "pca_k": {"type": ["integer", "null"]},
                    "pca_k_requested": {"type": ["integer", "null"]},
                    "eer": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
                    "threshold": {"type": ["number", "string", "null"]},
                    "seeds": {
                        "type": ["array", "null"],
                        "items": {
                            "type": "object",
                            "required": ["seed", "eer"],
                            "properties": {
                                "seed": {"type": "integer"},
                                "eer": {"type": "number", "minimum": 0, "maximum": 1},
                                "threshold": {"type": ["number", "string", "null"]},
                            },
                        },
                    },
                    "seed_count": {"type": "integer"},
                    "single_eer_a": {"type": ["number", "null"]},
                    "single_eer_b": {"type": ["number", "null"]},
                    "status": {"enum": ["ok", "failed"]},
                    "error": {"type": ["string", "null"]},
                },
            },
        },
        "reference_rows": {"type": "array"},
    },
}

CSV_COLUMNS = [
    "cell_id", "mode", "dataset", "target", "ptm_a", "ptm_b", "seed",
    "pca_k", "pca_k_requested", "eer", "threshold",
    "single_eer_a", "single_eer_b", "status", "error",
]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    mode: str
    datasets: dict
    ptm_list: list[str] | None = None
    pair_list: list[tuple[str, str]] = field(default_factory=list)
    pca_k: int | None = None
    itw_seeds: list[int] = field(default_factory=lambda: list(DEFAULT_ITW_SEEDS))
    split_fractions: tuple = DEFAULT_FRACTIONS
    hyper: TrainingHyper = field(default_factory=TrainingHyper)
    model: dict = field(default_factory=lambda: dict(DEFAULT_MODEL))
    include_singles: bool = False
    workers: int = 1
    output: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict, base_dir=".") -> "ExperimentConfig":
        base = Path(base_dir)
        known = {
            "mode", "datasets", "ptm_list", "pair_list", "pca_k", "itw_seeds",
            "split_fractions", "hyper", "model", "include_singles", "workers",
            "output",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "mode" not in raw or "datasets" not in raw:
            raise ConfigError("config requires 'mode' and 'datasets'")
        datasets = {}
        for dataset_id, ptms in raw["datasets"].items():
            datasets[dataset_id] = {}
            for ptm_id, splits in ptms.items():
                datasets[dataset_id][ptm_id] = {
                    split: str(base / path) for split, path in splits.items()
                }
        model = dict(DEFAULT_MODEL)
        model.update(raw.get("model", {}))
        config = cls(
            mode=raw["mode"],
            datasets=datasets,
            ptm_list=raw.get("ptm_list"),
            pair_list=[tuple(p) for p in raw.get("pair_list", [])],
            pca_k=raw.get("pca_k"),
            itw_seeds=list(raw.get("itw_seeds", DEFAULT_ITW_SEEDS)),
            split_fractions=tuple(raw.get("split_fractions", DEFAULT_FRACTIONS)),
            hyper=TrainingHyper.from_dict(raw.get("hyper", {})),
            model=model,
            include_singles=bool(raw.get("include_singles", False)),
            workers=int(raw.get("workers", 1)),
            output=dict(raw.get("output", {})),
            raw=raw,
        )
        config.validate()
        return config

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        raw = json.loads(path.read_text(encoding="utf-8"))
        return cls.from_dict(raw, base_dir=path.parent)

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not self.datasets:
            raise ConfigError("datasets map is empty")
        for dataset_id, ptms in self.datasets.items():
            if not ptms:
                raise ConfigError(f"dataset {dataset_id!r} lists no PTMs")
            for ptm_id, splits in ptms.items():
                keys = set(splits)
                if keys != {"unsplit"} and keys != {"train", "val", "test"}:
                    raise ConfigError(
                        f"dataset {dataset_id!r} / {ptm_id!r} must provide either "
                        "train/val/test paths or a single unsplit path, got "
                        f"{sorted(keys)}"
                    )
                for split, path in splits.items():
                    if not Path(path).is_file():
                        raise ConfigError(
                            f"missing corpus file for {dataset_id}/{ptm_id}/{split}: "
                            f"{path}"
                        )
        if self.mode == "fusion_grid" and not self.pair_list:
            raise ConfigError("fusion_grid mode requires a non-empty pair_list")
        if self.mode == "cross_corpus":
            if self.pca_k is None:
                raise ConfigError("cross_corpus mode requires pca_k")
            if self.pca_k < 1:
                raise ConfigError("pca_k must be >= 1")
            if len(self.datasets) < 2:
                raise ConfigError("cross_corpus mode needs at least two datasets")
        if not self.itw_seeds:
            raise ConfigError("itw_seeds must contain at least one seed")
        SplitSpec(self.split_fractions, 0).validate()
        self.hyper.validate()

    def config_hash(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def resolved_ptms(self) -> list[str]:
        """PTMs to run: the configured list, or those present in every dataset."""
        if self.ptm_list:
            return list(self.ptm_list)
        first = next(iter(self.datasets.values()))
        shared = [
            ptm for ptm in first
            if all(ptm in ptms for ptms in self.datasets.values())
        ]
        if not shared:
            raise ConfigError("no PTM id appears in every dataset; set ptm_list")
        return shared

    def probe_kwargs(self, kind: str) -> dict:
        if kind == "fcn":
            return {"hidden_dim": self.model["hidden_dim"]}
        return {
            "filters": self.model["filters"],
            "kernel": self.model["kernel"],
            "pool": self.model["pool"],
            "hidden_dim": self.model["hidden_dim"],
        }

    def fusion_kwargs(self) -> dict:
        return {
            "proj_dim": self.model["proj_dim"],
            "filters": self.model["filters"],
            "kernel": self.model["kernel"],
            "pool": self.model["pool"],
            "head_hidden": self.model["head_hidden"],
        }

    def effective_workers(self) -> int:
        workers = max(1, self.workers)
        env = os.environ.get("MIO_WORKERS")
        if env:
            try:
                workers = min(workers, max(1, int(env)))
            except ValueError:
                raise ConfigError(f"MIO_WORKERS must be an integer, got {env!r}")
        return workers


@dataclass
class Report:
    mode: str
    rows: list[dict]
    provenance: dict

    def to_payload(self) -> dict:
        return {
            "schema": REPORT_SCHEMA_ID,
            "provenance": self.provenance,
            "rows": self.rows,
            "reference_rows": [
                {**row, "label": REFERENCE_LABEL} for row in REFERENCE_ROWS
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_payload(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_payload(cls, payload: dict) -> "Report":
        if payload.get("schema") != REPORT_SCHEMA_ID:
            raise ValueError(
                f"unsupported report schema {payload.get('schema')!r}"
            )
        return cls(
            mode=payload["provenance"]["mode"],
            rows=payload["rows"],
            provenance=payload["provenance"],
        )

    @classmethod
    def from_file(cls, path) -> "Report":
        return cls.from_payload(json.loads(Path(path).read_text(encoding="utf-8")))


def _fmt_threshold(threshold):
    if threshold is None:
        return None
    if math.isinf(threshold):
        return "inf"
    return float(threshold)


def _new_row(cell_id, mode, **fields):
    row = {
        "cell_id": cell_id,
        "mode": mode,
        "dataset": None,
        "target": None,
        "ptm_a": None,
        "ptm_b": None,
        "pca_k": None,
        "pca_k_requested": None,
        "eer": None,
        "threshold": None,
        "seeds": None,
        "seed_count": 0,
        "single_eer_a": None,
        "single_eer_b": None,
        "status": "ok",
        "error": None,
    }
    row.update(fields)
    return row


def _failed_row(cell_id, mode, error, **fields):
    return _new_row(cell_id, mode, status="failed", error=str(error), **fields)


def _load_all(config: ExperimentConfig) -> dict:
    """Load every referenced MIOE file once, up front."""
    corpora = {}
    for ptms in config.datasets.values():
        for splits in ptms.values():
            for path in splits.values():
                if path not in corpora:
                    corpora[path] = load_corpus(path)
    return corpora


class _Runner:
    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.corpora = _load_all(config)

    def splits_for(self, dataset: str, ptm: str, seed: int):
        """(train, val, test) corpora; unsplit datasets are split with `seed`."""
        entry = self.config.datasets[dataset].get(ptm)
        if entry is None:
            raise ValueError(f"dataset {dataset!r} has no corpus for PTM {ptm!r}")
        if "unsplit" in entry:
            corpus = self.corpora[entry["unsplit"]]
            return split_corpus(
                corpus, SplitSpec(self.config.split_fractions, seed)
            )
        return (
            self.corpora[entry["train"]],
            self.corpora[entry["val"]],
            self.corpora[entry["test"]],
        )

    def is_unsplit(self, dataset: str, ptm: str) -> bool:
        entry = self.config.datasets[dataset].get(ptm)
        return entry is not None and "unsplit" in entry

    def run_cells(self, cells):
        """cells: list of (builder() -> list[rows]). Order is preserved."""
        workers = self.config.effective_workers()
        if workers <= 1 or len(cells) <= 1:
            results = [builder() for builder in cells]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(lambda b: b(), cells))
        return [row for rows in results for row in rows]


def _probe_kind(mode: str) -> str:
    return "fcn" if mode == "single_fcn" else "cnn"


def _train_eval_probe(config, kind, train, val, test):
    probe, _ = train_probe(kind, train, val, config.hyper,
                           **config.probe_kwargs(kind))
    return compute_eer(score(probe, test))


def run_single(config: ExperimentConfig) -> Report:
    """One probe per (dataset, PTM); unsplit datasets use the seed protocol."""
    if config.mode not in ("single_fcn", "single_cnn"):
        raise ConfigError(f"run_single got mode {config.mode!r}")
    runner = _Runner(config)
    kind = _probe_kind(config.mode)
    cells = []
    for dataset in config.datasets:
        ptms = config.ptm_list or list(config.datasets[dataset])
        for ptm in ptms:
            if ptm not in config.datasets[dataset]:
                continue
            cell_id = f"{config.mode}/{dataset}/{ptm}"

            def build(dataset=dataset, ptm=ptm, cell_id=cell_id):
                try:
                    if runner.is_unsplit(dataset, ptm):
                        return [run_itw_cell(config, runner, cell_id, dataset, ptm,
                                             kind)]
                    train, val, test = runner.splits_for(dataset, ptm, 0)
                    result = _train_eval_probe(config, kind, train, val, test)
                    return [_new_row(
                        cell_id, config.mode, dataset=dataset, ptm_a=ptm,
                        eer=result.eer,
                        threshold=_fmt_threshold(result.threshold),
                    )]
                except Exception as exc:
                    return [_failed_row(cell_id, config.mode, exc,
                                        dataset=dataset, ptm_a=ptm)]

            cells.append(build)
    rows = runner.run_cells(cells)
    return _assemble(config, rows)


def run_itw_cell(config, runner, cell_id, dataset, ptm, kind) -> dict:
    """Split/train/evaluate once per configured seed and average the EERs."""
    seeds = []
    for seed in config.itw_seeds:
        train, val, test = runner.splits_for(dataset, ptm, seed)
        result = _train_eval_probe(config, kind, train, val, test)
        seeds.append({
            "seed": int(seed),
            "eer": result.eer,
            "threshold": _fmt_threshold(result.threshold),
        })
    mean = sum(s["eer"] for s in seeds) / len(seeds)
    return _new_row(
        cell_id, config.mode, dataset=dataset, ptm_a=ptm,
        eer=mean, seeds=seeds, seed_count=len(seeds),
    )


def run_itw_protocol(config: ExperimentConfig, corpus: EmbeddingCorpus,
                     kind: str = "cnn") -> dict:
    """Seed-averaged protocol over one unsplit corpus; returns a report row."""
    seeds = []
    for seed in config.itw_seeds:
        train, val, test = split_corpus(
            corpus, SplitSpec(config.split_fractions, seed)
        )
        result = _train_eval_probe(config, kind, train, val, test)
        seeds.append({
            "seed": int(seed),
            "eer": result.eer,
            "threshold": _fmt_threshold(result.threshold),
        })
    mean = sum(s["eer"] for s in seeds) / len(seeds)
    return _new_row(
        f"itw/{corpus.name}/{corpus.ptm_id}", config.mode,
        dataset=corpus.name, ptm_a=corpus.ptm_id,
        eer=mean, seeds=seeds, seed_count=len(seeds),
    )


def _split_pairs(pairs: list[AlignedPair], fractions, seed: int):
    n = len(pairs)
    if n < 3:
        raise ValueError(f"need at least 3 aligned pairs to split, got {n}")
    n_train, n_val, _ = partition_sizes(n, fractions)
    if n_train == 0:
        raise ValueError("split spec produces an empty training set")
    perm = np.random.default_rng(seed).permutation(n)
    take = lambda idx: [pairs[int(i)] for i in idx]
    return (
        take(perm[:n_train]),
        take(perm[n_train : n_train + n_val]),
        take(perm[n_train + n_val :]),
    )


def _pair_side_corpus(pairs, side, name, ptm, tag):
    records = [
        EmbeddingRecord(p.clip_id, p.label,
                        p.vector_a if side == "a" else p.vector_b)
        for p in pairs
    ]
    return EmbeddingCorpus(name=name, ptm_id=ptm, dim=len(records[0].vector),
                           split_tag=tag, records=records)


def _train_eval_mio(config, train_pairs, val_pairs, test_pairs):
    model, _ = train_mio(train_pairs, val_pairs, config.hyper,
                         **config.fusion_kwargs())
    return compute_eer(score_mio(model, test_pairs))


def run_fusion_grid(config: ExperimentConfig) -> Report:
    """One fusion model per (pair, dataset) cell, in configured order."""
    if config.mode != "fusion_grid":
        raise ConfigError(f"run_fusion_grid got mode {config.mode!r}")
    runner = _Runner(config)
    cells = []
    for ptm_a, ptm_b in config.pair_list:
        for dataset in config.datasets:
            cell_id = f"fusion/{dataset}/{ptm_a}+{ptm_b}"

            def build(dataset=dataset, ptm_a=ptm_a, ptm_b=ptm_b, cell_id=cell_id):
                try:
                    return [_fusion_cell(config, runner, cell_id, dataset,
                                         ptm_a, ptm_b)]
                except Exception as exc:
                    return [_failed_row(cell_id, config.mode, exc,
                                        dataset=dataset, ptm_a=ptm_a, ptm_b=ptm_b)]

            cells.append(build)
    rows = runner.run_cells(cells)
    return _assemble(config, rows)


def _fusion_cell(config, runner, cell_id, dataset, ptm_a, ptm_b) -> dict:
    unsplit = runner.is_unsplit(dataset, ptm_a) and runner.is_unsplit(dataset, ptm_b)
    if unsplit:
        corpus_a = runner.corpora[config.datasets[dataset][ptm_a]["unsplit"]]
        corpus_b = runner.corpora[config.datasets[dataset][ptm_b]["unsplit"]]
        pairs = align_pair(corpus_a, corpus_b)
        seeds = []
        for seed in config.itw_seeds:
            train_p, val_p, test_p = _split_pairs(
                pairs, config.split_fractions, seed
            )
            result = _train_eval_mio(config, train_p, val_p, test_p)
            seeds.append({
                "seed": int(seed),
                "eer": result.eer,
                "threshold": _fmt_threshold(result.threshold),
            })
        mean = sum(s["eer"] for s in seeds) / len(seeds)
        return _new_row(cell_id, config.mode, dataset=dataset,
                        ptm_a=ptm_a, ptm_b=ptm_b, eer=mean, seeds=seeds,
                        seed_count=len(seeds))

    train_a, val_a, test_a = runner.splits_for(dataset, ptm_a, config.itw_seeds[0])
    train_b, val_b, test_b = runner.splits_for(dataset, ptm_b, config.itw_seeds[0])
    train_pairs = align_pair(train_a, train_b)
    val_pairs = align_pair(val_a, val_b)
    test_pairs = align_pair(test_a, test_b)
    result = _train_eval_mio(config, train_pairs, val_pairs, test_pairs)
    row = _new_row(cell_id, config.mode, dataset=dataset, ptm_a=ptm_a,
                   ptm_b=ptm_b, eer=result.eer,
                   threshold=_fmt_threshold(result.threshold))
    if config.include_singles:
        row["single_eer_a"] = _single_from_pairs(
            config, dataset, ptm_a, "a", train_pairs, val_pairs, test_pairs
        )
        row["single_eer_b"] = _single_from_pairs(
            config, dataset, ptm_b, "b", train_pairs, val_pairs, test_pairs
        )
    return row


def _single_from_pairs(config, dataset, ptm, side, train_pairs, val_pairs,
                       test_pairs) -> float:
    """CNN probe trained on one side of the aligned pairs, same clips as fusion."""
    train = _pair_side_corpus(train_pairs, side, dataset, ptm, "train")
    val = _pair_side_corpus(val_pairs, side, dataset, ptm, "val")
    test = _pair_side_corpus(test_pairs, side, dataset, ptm, "test")
    return _train_eval_probe(config, "cnn", train, val, test).eer


def run_cross_corpus(config: ExperimentConfig) -> Report:
    """Train on each dataset, evaluate on the other datasets, after PCA.

    The transform is fit per PTM on the source training corpus only and
    then applied to the source's train/val and every target test corpus.
    The requested dimension is capped at min(dim, n_train - 1); the row
    records both the requested and the effective value.
    """
    if config.mode != "cross_corpus":
        raise ConfigError(f"run_cross_corpus got mode {config.mode!r}")
    runner = _Runner(config)
    datasets = list(config.datasets)
    cells = []
    for ptm in config.resolved_ptms():
        for source in datasets:
            targets = [d for d in datasets if d != source]

            def build(ptm=ptm, source=source, targets=targets):
                return _cross_cell_single(config, runner, ptm, source, targets)

            cells.append(build)
    for ptm_a, ptm_b in config.pair_list:
        for source in datasets:
            targets = [d for d in datasets if d != source]

            def build(ptm_a=ptm_a, ptm_b=ptm_b, source=source, targets=targets):
                return _cross_cell_pair(config, runner, ptm_a, ptm_b, source,
                                        targets)

            cells.append(build)
    rows = runner.run_cells(cells)
    return _assemble(config, rows)


def _cap_k(config, corpus):
    return min(config.pca_k, corpus.dim, len(corpus) - 1)


def _cross_cell_single(config, runner, ptm, source, targets) -> list[dict]:
    seed = config.itw_seeds[0]
    base = f"cross/{ptm}/{source}"
    try:
        train, val, _ = runner.splits_for(source, ptm, seed)
        k = _cap_k(config, train)
        transform = fit_pca(train, k)
        probe, _ = train_probe(
            "cnn", apply_pca(transform, train), apply_pca(transform, val),
            config.hyper, **config.probe_kwargs("cnn"),
        )
    except Exception as exc:
        return [
            _failed_row(f"{base}->{target}", config.mode, exc, dataset=source,
                        target=target, ptm_a=ptm,
                        pca_k_requested=config.pca_k)
            for target in targets
        ]
    rows = []
    for target in targets:
        cell_id = f"{base}->{target}"
        try:
            _, _, test = runner.splits_for(target, ptm, seed)
            result = compute_eer(score(probe, apply_pca(transform, test)))
            rows.append(_new_row(
                cell_id, config.mode, dataset=source, target=target, ptm_a=ptm,
                pca_k=k, pca_k_requested=config.pca_k, eer=result.eer,
                threshold=_fmt_threshold(result.threshold),
            ))
        except Exception as exc:
            rows.append(_failed_row(cell_id, config.mode, exc, dataset=source,
                                    target=target, ptm_a=ptm, pca_k=k,
                                    pca_k_requested=config.pca_k))
    return rows


def _cross_cell_pair(config, runner, ptm_a, ptm_b, source, targets) -> list[dict]:
    seed = config.itw_seeds[0]
    base = f"cross/{ptm_a}+{ptm_b}/{source}"
    try:
        train_a, val_a, _ = runner.splits_for(source, ptm_a, seed)
        train_b, val_b, _ = runner.splits_for(source, ptm_b, seed)
        k_a = _cap_k(config, train_a)
        k_b = _cap_k(config, train_b)
        transform_a = fit_pca(train_a, k_a)
        transform_b = fit_pca(train_b, k_b)
        train_pairs = align_pair(apply_pca(transform_a, train_a),
                                 apply_pca(transform_b, train_b))
        val_pairs = align_pair(apply_pca(transform_a, val_a),
                               apply_pca(transform_b, val_b))
        model, _ = train_mio(train_pairs, val_pairs, config.hyper,
                             **config.fusion_kwargs())
    except Exception as exc:
        return [
            _failed_row(f"{base}->{target}", config.mode, exc, dataset=source,
                        target=target, ptm_a=ptm_a, ptm_b=ptm_b,
                        pca_k_requested=config.pca_k)
            for target in targets
        ]
    rows = []
    for target in targets:
        cell_id = f"{base}->{target}"
        try:
            _, _, test_a = runner.splits_for(target, ptm_a, seed)
            _, _, test_b = runner.splits_for(target, ptm_b, seed)
            test_pairs = align_pair(apply_pca(transform_a, test_a),
                                    apply_pca(transform_b, test_b))
            result = compute_eer(score_mio(model, test_pairs))
            rows.append(_new_row(
                cell_id, config.mode, dataset=source, target=target,
                ptm_a=ptm_a, ptm_b=ptm_b, pca_k=min(k_a, k_b),
                pca_k_requested=config.pca_k, eer=result.eer,
                threshold=_fmt_threshold(result.threshold),
            ))
        except Exception as exc:
            rows.append(_failed_row(cell_id, config.mode, exc, dataset=source,
                                    target=target, ptm_a=ptm_a, ptm_b=ptm_b,
                                    pca_k_requested=config.pca_k))
    return rows


def _assemble(config: ExperimentConfig, rows: list[dict]) -> Report:
    for row in rows:
        if row["eer"] is not None and not 0.0 <= row["eer"] <= 1.0:
            raise AssertionError(f"EER out of range in row {row['cell_id']}")
    provenance = {
        "engine_version": ENGINE_VERSION,
        "config_hash": config.config_hash(),
        "mode": config.mode,
        "hyper": config.hyper.to_dict(),
        "itw_seeds": [int(s) for s in config.itw_seeds],
        "split_fractions": list(config.split_fractions),
        "pca_fit_scope": "train-only",
        "config": config.raw,
    }
    return Report(mode=config.mode, rows=rows, provenance=provenance)


def run_experiment(config: ExperimentConfig) -> Report:
    if config.mode in ("single_fcn", "single_cnn"):
        return run_single(config)
    if config.mode == "fusion_grid":
        return run_fusion_grid(config)
    return run_cross_corpus(config)


# --- rendering -------------------------------------------------------------

def _cell_text(row):
    if row["status"] == "failed":
        return f"FAILED({row['error']})"
    return f"{row['eer'] * 100:.2f}"


def _markdown_table(headers, table_rows):
    lines = ["| " + " | ".join(headers) + " |",
             "| " + " | ".join("---" for _ in headers) + " |"]
    for row in table_rows:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines)


def _ordered_unique(values):
    seen = {}
    for v in values:
        seen.setdefault(v, None)
    return list(seen)


def _render_markdown(report: Report) -> str:
    rows = report.rows
    out = [
        "# Embedding benchmark report",
        "",
        f"- mode: `{report.mode}`",
        f"- engine: {report.provenance['engine_version']}",
        f"- config hash: `{report.provenance['config_hash']}`",
        "",
    ]
    if report.mode in ("single_fcn", "single_cnn", "fusion_grid"):
        datasets = _ordered_unique(r["dataset"] for r in rows)
        if report.mode == "fusion_grid":
            key = lambda r: f"{r['ptm_a']} + {r['ptm_b']}"
            first_col = "PTM Combinations"
            title = "## EER (%) for PTM representation combinations"
        else:
            key = lambda r: r["ptm_a"]
            first_col = "PTM"
            kind = "FCN" if report.mode == "single_fcn" else "CNN"
            title = f"## EER (%) for {kind} models"
        row_labels = _ordered_unique(key(r) for r in rows)
        cells = {(key(r), r["dataset"]): r for r in rows}
        table = []
        for label in row_labels:
            line = [label]
            for dataset in datasets:
                row = cells.get((label, dataset))
                line.append(_cell_text(row) if row else "-")
            table.append(line)
        out += [title, "", _markdown_table([first_col] + datasets, table), ""]

        seed_rows = [r for r in rows if r.get("seeds")]
        if seed_rows:
            seed_ids = [s["seed"] for s in seed_rows[0]["seeds"]]
            headers = ["dataset", first_col] + [f"seed {s}" for s in seed_ids] + ["mean"]
            table = []
            for r in seed_rows:
                eers = {s["seed"]: s["eer"] for s in r["seeds"]}
                table.append(
                    [r["dataset"], key(r)]
                    + [f"{eers[s] * 100:.2f}" if s in eers else "-" for s in seed_ids]
                    + [f"{r['eer'] * 100:.2f}"]
                )
            out += ["## Per-seed EER (%) for unsplit datasets", "",
                    _markdown_table(headers, table), ""]

        singles = [r for r in rows if r.get("single_eer_a") is not None]
        if singles:
            table = [
                [f"{r['ptm_a']} + {r['ptm_b']}", r["dataset"], _cell_text(r),
                 f"{r['single_eer_a'] * 100:.2f}", f"{r['single_eer_b'] * 100:.2f}"]
                for r in singles
            ]
            out += ["## Fusion vs single-representation EER (%)", "",
                    _markdown_table(
                        ["PTM Combinations", "dataset", "fused", "single A",
                         "single B"], table), ""]
    else:
        def model_key(r):
            return r["ptm_a"] if r["ptm_b"] is None else f"{r['ptm_a']} + {r['ptm_b']}"

        labels = _ordered_unique(model_key(r) for r in rows)
        columns = _ordered_unique(f"{r['dataset']}->{r['target']}" for r in rows)
        cells = {(model_key(r), f"{r['dataset']}->{r['target']}"): r for r in rows}
        k = next((r["pca_k_requested"] for r in rows if r["pca_k_requested"]), None)
        table = []
        for label in labels:
            line = [label]
            for col in columns:
                row = cells.get((label, col))
                line.append(_cell_text(row) if row else "-")
            table.append(line)
        out += [
            f"## Cross-corpus EER (%) at {k}-dimensional representations",
            "",
            "Columns are train->test dataset; the transform is fit on the "
            "training corpus only.",
            "",
            _markdown_table(["PTM"] + columns, table),
            "",
        ]

    out += [
        f"## Reference results ({REFERENCE_LABEL})",
        "",
        _markdown_table(
            ["Model", "Dataset", "EER (%)"],
            [[r["model"], r["dataset"], f"{r['eer_percent']:.2f}"]
             for r in REFERENCE_ROWS],
        ),
        "",
        REFERENCE_NOTE,
        "",
    ]
    return "\n".join(out)


def _csv_value(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _render_csv(report: Report) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)

    def write_line(row, seed, eer, threshold):
        writer.writerow([
            _csv_value(row["cell_id"]), _csv_value(row["mode"]),
            _csv_value(row["dataset"]), _csv_value(row["target"]),
            _csv_value(row["ptm_a"]), _csv_value(row["ptm_b"]),
            _csv_value(seed), _csv_value(row["pca_k"]),
            _csv_value(row["pca_k_requested"]), _csv_value(eer),
            _csv_value(threshold), _csv_value(row["single_eer_a"]),
            _csv_value(row["single_eer_b"]), _csv_value(row["status"]),
            _csv_value(row["error"]),
        ])

    for row in report.rows:
        if row.get("seeds"):
            for entry in row["seeds"]:
                write_line(row, entry["seed"], entry["eer"], entry["threshold"])
            write_line(row, "mean", row["eer"], None)
        else:
            write_line(row, None, row["eer"], row["threshold"])
    return buffer.getvalue()


def render_report(report: Report, fmt: str) -> str:
    if fmt == "markdown":
        return _render_markdown(report)
    if fmt == "csv":
        return _render_csv(report)
    if fmt == "json":
        return report.to_json()
    raise ValueError(f"unknown report format {fmt!r}; expected markdown, csv or json")


def write_report_figures(report: Report, figures_dir) -> list[Path]:
    from . import figures

    figures_dir = Path(figures_dir)
    figures_dir.mkdir(parents=True, exist_ok=True)
    written = []
    ok_rows = [r for r in report.rows if r["status"] == "ok" and r["eer"] is not None]
    if not ok_rows:
        return written
    if report.mode in ("single_fcn", "single_cnn", "fusion_grid"):
        def key(r):
            return r["ptm_a"] if r["ptm_b"] is None else f"{r['ptm_a']} + {r['ptm_b']}"

        table = {}
        for r in ok_rows:
            table.setdefault(key(r), {})[r["dataset"]] = r["eer"]
        written.append(figures.save_eer_bars(
            table, figures_dir / f"eer_{report.mode}.png",
            title=f"EER by {'combination' if report.mode == 'fusion_grid' else 'PTM'}",
        ))
        seed_rows = [r for r in ok_rows if r.get("seeds")]
        if seed_rows:
            seed_table = {
                f"{r['dataset']}/{key(r)}": [(s["seed"], s["eer"]) for s in r["seeds"]]
                for r in seed_rows
            }
            written.append(figures.save_seed_bars(
                seed_table, figures_dir / f"per_seed_{report.mode}.png"
            ))
    else:
        def model_key(r):
            return r["ptm_a"] if r["ptm_b"] is None else f"{r['ptm_a']} + {r['ptm_b']}"

        for label in _ordered_unique(model_key(r) for r in ok_rows):
            sub = [r for r in ok_rows if model_key(r) == label]
            sources = _ordered_unique(r["dataset"] for r in sub)
            targets = _ordered_unique(r["target"] for r in sub)
            matrix = np.full((len(sources), len(targets)), np.nan)
            for r in sub:
                matrix[sources.index(r["dataset"]), targets.index(r["target"])] = r["eer"]
            safe = label.replace(" ", "").replace("+", "_")
            written.append(figures.save_heatmap(
                [f"train {s}" for s in sources], [f"test {t}" for t in targets],
                matrix, figures_dir / f"cross_{safe}.png",
                title=f"Cross-corpus EER (%): {label}",
            ))
    return written


def write_report_outputs(report: Report, out_dir, formats=("markdown", "csv", "json"),
                         figures: bool = True) -> list[Path]:
    """Write report.<md|csv|json> (and figures/) under `out_dir`."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    suffix = {"markdown": "md", "csv": "csv", "json": "json"}
    written = []
    for fmt in formats:
        if fmt not in suffix:
            raise ValueError(f"unknown report format {fmt!r}")
        path = out_dir / f"report.{suffix[fmt]}"
        path.write_text(render_report(report, fmt), encoding="utf-8")
        written.append(path)
    if figures:
        written.extend(write_report_figures(report, out_dir / "figures"))
    return written
