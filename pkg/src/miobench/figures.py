"""Matplotlib rendering for reports, training curves, and ROC diagnostics.

Everything here renders straight to a file; the Agg backend is forced so
figures work in headless runs. Figure files sit alongside the delimited
report outputs and are purely presentational: the authoritative numbers
live in the markdown/CSV/JSON payloads.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import ScoreSet, compute_eer, roc_points


def save_training_history(history, path, title="Training history"):
    epochs = np.arange(1, len(history.train_loss) + 1)
    fig, ax_loss = plt.subplots(figsize=(7, 4.5))
    ax_loss.plot(epochs, history.train_loss, "o-", color="tab:blue",
                 label="train loss")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("cross-entropy loss", color="tab:blue")
    ax_eer = ax_loss.twinx()
    ax_eer.plot(epochs, np.asarray(history.val_eer) * 100, "s-",
                color="tab:red", label="val EER")
    ax_eer.set_ylabel("validation EER (%)", color="tab:red")
    ax_eer.axvline(history.best_epoch + 1, color="gray", linestyle="--",
                   linewidth=1, label="selected epoch")
    ax_loss.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_roc_curve(scores: ScoreSet, path, title="ROC"):
    points = roc_points(scores)
    fpr = [p.fpr for p in points]
    tpr = [1.0 - p.fnr for p in points]
    result = compute_eer(scores)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(fpr, tpr, "-", color="tab:blue")
    ax.plot([0, 1], [1, 0], ":", color="gray", linewidth=1)
    ax.plot([result.fpr_at_threshold], [1 - result.fnr_at_threshold], "o",
            color="tab:red",
            label=f"EER {result.eer * 100:.2f}%")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(title)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_eer_bars(table, path, title, ylabel="EER (%)"):
    """Grouped bars; `table` maps row label -> {column label -> EER fraction}."""
    rows = list(table.keys())
    columns = sorted({c for cells in table.values() for c in cells})
    width = 0.8 / max(len(columns), 1)
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(rows)), 4.5))
    base = np.arange(len(rows))
    for j, col in enumerate(columns):
        values = [
            table[row].get(col, np.nan) * 100 if table[row].get(col) is not None
            else np.nan
            for row in rows
        ]
        ax.bar(base + j * width, values, width, label=col)
    ax.set_xticks(base + width * (len(columns) - 1) / 2)
    ax.set_xticklabels(rows, rotation=30, ha="right")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_heatmap(row_labels, col_labels, values, path, title):
    """EER heatmap; `values` is a 2-D array of fractions (NaN for missing)."""
    values = np.asarray(values, dtype=float) * 100
    fig, ax = plt.subplots(
        figsize=(max(4, 1.1 * len(col_labels) + 2), max(3, 0.7 * len(row_labels) + 2))
    )
    image = ax.imshow(values, cmap="viridis", aspect="auto")
    ax.set_xticks(range(len(col_labels)), col_labels, rotation=30, ha="right")
    ax.set_yticks(range(len(row_labels)), row_labels)
    for i in range(len(row_labels)):
        for j in range(len(col_labels)):
            if np.isfinite(values[i, j]):
                ax.text(j, i, f"{values[i, j]:.2f}", ha="center", va="center",
                        color="white", fontsize=9)
    fig.colorbar(image, ax=ax, label="EER (%)")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_seed_bars(table, path, title="EER per splitting seed"):
    """`table` maps row label -> list of (seed, EER fraction)."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for row, seed_eers in table.items():
        seeds = [str(s) for s, _ in seed_eers]
        values = [e * 100 for _, e in seed_eers]
        ax.plot(seeds, values, "o-", label=row)
    ax.set_xlabel("splitting seed")
    ax.set_ylabel("EER (%)")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
