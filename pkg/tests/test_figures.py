import numpy as np

from miobench.figures import (
    save_eer_bars,
    save_heatmap,
    save_roc_curve,
    save_seed_bars,
    save_training_history,
)
from miobench.metrics import ScoreSet
from miobench.training import TrainHistory

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def assert_png(path):
    data = path.read_bytes()
    assert data[:8] == PNG_MAGIC and len(data) > 1000


def test_training_history_figure(tmp_path):
    history = TrainHistory(
        train_loss=[0.7, 0.5, 0.4, 0.35], val_eer=[0.4, 0.2, 0.25, 0.22],
        best_epoch=1,
    )
    assert_png(save_training_history(history, tmp_path / "hist.png"))


def test_roc_figure(tmp_path):
    rng = np.random.default_rng(1)
    scores = ScoreSet(
        [f"c{i}" for i in range(40)],
        [0] * 20 + [1] * 20,
        np.concatenate([rng.uniform(0, 0.6, 20), rng.uniform(0.4, 1.0, 20)]),
    )
    assert_png(save_roc_curve(scores, tmp_path / "roc.png"))


def test_eer_bars_figure(tmp_path):
    table = {
        "xls-r": {"ASV": 0.0167, "ITW": 0.0024},
        "whisper": {"ASV": 0.0234, "ITW": 0.0073},
    }
    assert_png(save_eer_bars(table, tmp_path / "bars.png", "EER by PTM"))


def test_heatmap_figure(tmp_path):
    matrix = np.array([[0.22, 0.12], [np.nan, 0.3]])
    assert_png(save_heatmap(["train A", "train B"], ["test B", "test C"],
                            matrix, tmp_path / "heat.png", "cross-corpus"))


def test_seed_bars_figure(tmp_path):
    table = {"ITW/xls-r": [(1, 0.002), (2, 0.004), (3, 0.001)]}
    assert_png(save_seed_bars(table, tmp_path / "seeds.png"))
