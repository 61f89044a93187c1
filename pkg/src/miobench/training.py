"""Shared mini-batch training loop with validation-EER model selection.

Seeded and deterministic: parameter init comes from the model's init
seed, epoch shuffles from `shuffle_seed`, and two runs with identical
seeds produce bit-identical parameters and history. After the last epoch
the model is rewound to the snapshot from the epoch with the lowest
validation EER (ties go to the earliest epoch).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import AdamState, TrainingHyper, adam_step


@dataclass
class TrainHistory:
    train_loss: list[float]
    val_eer: list[float]
    best_epoch: int

    def to_dict(self):
        return {
            "train_loss": self.train_loss,
            "val_eer": self.val_eer,
            "best_epoch": self.best_epoch,
        }


def fit(model, n_train: int, batch_fn, val_eer_fn,
        hyper: TrainingHyper) -> TrainHistory:
    """Train `model` in place and return its history.

    batch_fn(indices) must return the (inputs..., labels) tuple consumed
    by model.loss_and_grads; val_eer_fn() evaluates the current
    parameters on the validation split. The gradient is the mean over
    each mini-batch and a final partial batch is kept, not dropped.
    """
    hyper.validate()
    if n_train < 1:
        raise ValueError("empty training set")
    params = model.parameters()
    optimizer = AdamState.from_hyper(params, hyper)
    shuffle_rng = np.random.default_rng(hyper.shuffle_seed)

    losses: list[float] = []
    eers: list[float] = []
    best_epoch = -1
    best_eer = np.inf
    best_params = None
    for epoch in range(hyper.epochs):
        order = shuffle_rng.permutation(n_train)
        total = 0.0
        for start in range(0, n_train, hyper.batch_size):
            idx = order[start : start + hyper.batch_size]
            loss, grads = model.loss_and_grads(*batch_fn(idx))
            adam_step(params, grads, optimizer)
            total += loss * len(idx)
        losses.append(total / n_train)
        eer = val_eer_fn()
        eers.append(eer)
        if eer < best_eer:
            best_eer = eer
            best_epoch = epoch
            best_params = [p.copy() for p in params]
    model.set_parameters(best_params)
    return TrainHistory(train_loss=losses, val_eer=eers, best_epoch=best_epoch)
