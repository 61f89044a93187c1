"""Benchmarking engine for audio-deepfake detection on frozen speech embeddings.

Trains small probing heads (an FCN and a 1D CNN) and a two-branch
bilinear-pooling fusion model on labeled embedding corpora, evaluates
with Equal Error Rate, and orchestrates single-corpus, fusion-grid, and
PCA-matched cross-corpus experiments into reproducible reports.
"""

from .corpus import (
    AlignedPair,
    EmbeddingCorpus,
    EmbeddingRecord,
    MioeError,
    SplitSpec,
    align_pair,
    load_corpus,
    save_corpus,
    split_corpus,
    synthesize_complementary_pair,
    synthesize_corpus,
)
from .fusion import (
    MioModel,
    bilinear_pool,
    load_mio,
    mio_forward,
    save_mio,
    score_mio,
    train_mio,
)
from .harness import (
    ExperimentConfig,
    Report,
    render_report,
    run_cross_corpus,
    run_experiment,
    run_fusion_grid,
    run_itw_protocol,
    run_single,
    write_report_outputs,
)
from .metrics import EerResult, ScoreSet, compute_eer, roc_points
from .nn import AdamState, Conv1dLayer, DenseLayer, TrainingHyper, adam_step
from .pca import PcaTransform, apply_pca, fit_pca, load_pca, save_pca
from .probes import CnnProbe, FcnProbe, load_probe, save_probe, score, train_probe
from .training import TrainHistory
from .version import ENGINE_VERSION

__version__ = ENGINE_VERSION

__all__ = [
    "AlignedPair",
    "AdamState",
    "CnnProbe",
    "Conv1dLayer",
    "DenseLayer",
    "EerResult",
    "EmbeddingCorpus",
    "EmbeddingRecord",
    "ENGINE_VERSION",
    "ExperimentConfig",
    "FcnProbe",
    "MioeError",
    "MioModel",
    "PcaTransform",
    "Report",
    "ScoreSet",
    "SplitSpec",
    "TrainHistory",
    "TrainingHyper",
    "adam_step",
    "align_pair",
    "apply_pca",
    "bilinear_pool",
    "compute_eer",
    "fit_pca",
    "load_corpus",
    "load_mio",
    "load_pca",
    "load_probe",
    "mio_forward",
    "render_report",
    "roc_points",
    "run_cross_corpus",
    "run_experiment",
    "run_fusion_grid",
    "run_itw_protocol",
    "run_single",
    "save_corpus",
    "save_mio",
    "save_pca",
    "save_probe",
    "score",
    "score_mio",
    "split_corpus",
    "synthesize_complementary_pair",
    "synthesize_corpus",
    "train_mio",
    "train_probe",
    "write_report_outputs",
]
