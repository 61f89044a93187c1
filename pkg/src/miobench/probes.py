"""Single-representation probing heads: a two-layer FCN and a small 1D CNN.

Both consume one pooled embedding vector per clip and emit softmax
probabilities over {bonafide, spoof}. The CNN treats the embedding as a
one-channel sequence along the feature axis, since pooled representations
leave no other axis to convolve.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .corpus import EmbeddingCorpus
from .metrics import ScoreSet, compute_eer
from .nn import (
    ARCH_CNN,
    ARCH_FCN,
    Conv1dLayer,
    DenseLayer,
    TrainingHyper,
    read_checkpoint,
    write_checkpoint,
)
from .training import TrainHistory, fit

SCORE_BATCH = 512


class FcnProbe:
    """relu dense hidden layer into a 2-way softmax output."""

    arch_tag = ARCH_FCN

    def __init__(self, in_dim: int, hidden_dim: int = 128, init_seed: int = 0,
                 dtype=np.float32):
        if in_dim < 1:
            raise ValueError("in_dim must be >= 1")
        self.in_dim = in_dim
        self.hidden_dim = hidden_dim
        rng = np.random.default_rng(init_seed)
        self.hidden = DenseLayer.init(rng, in_dim, hidden_dim, dtype)
        self.output = DenseLayer.init(rng, hidden_dim, 2, dtype)

    def config(self):
        return {"in_dim": self.in_dim, "hidden_dim": self.hidden_dim}

    def parameters(self):
        return [self.hidden.weights, self.hidden.bias,
                self.output.weights, self.output.bias]

    def set_parameters(self, values):
        for p, v in zip(self.parameters(), values):
            np.copyto(p, v)

    def astype(self, dtype):
        clone = FcnProbe.__new__(FcnProbe)
        clone.in_dim = self.in_dim
        clone.hidden_dim = self.hidden_dim
        clone.hidden = self.hidden.astype(dtype)
        clone.output = self.output.astype(dtype)
        return clone

    def forward(self, x):
        x = np.asarray(x)
        h = nn.relu(nn.dense_forward(self.hidden, x))
        return nn.softmax(nn.dense_forward(self.output, h))

    def loss_and_grads(self, x, labels):
        z1 = nn.dense_forward(self.hidden, x)
        a1 = nn.relu(z1)
        probs = nn.softmax(nn.dense_forward(self.output, a1))
        loss = nn.batch_cross_entropy(probs, labels)
        g2 = nn.softmax_cross_entropy_grad(probs, labels)
        gw2, gb2, ga1 = nn.dense_backward(self.output, a1, g2)
        g1 = nn.relu_backward(z1, ga1)
        gw1, gb1, _ = nn.dense_backward(self.hidden, x, g1)
        return loss, [gw1, gb1, gw2, gb2]


class CnnProbe:
    """conv -> maxpool -> flatten -> relu dense -> 2-way softmax."""

    arch_tag = ARCH_CNN

    def __init__(self, in_dim: int, filters: int = 32, kernel: int = 3,
                 pool: int = 2, hidden_dim: int = 128, init_seed: int = 0,
                 dtype=np.float32):
        if in_dim < 2:
            raise ValueError("in_dim must be >= 2 for the CNN probe")
        if in_dim < pool:
            raise ValueError(f"in_dim {in_dim} shorter than pool window {pool}")
        self.in_dim = in_dim
        self.filters = filters
        self.kernel = kernel
        self.pool = pool
        self.hidden_dim = hidden_dim
        self.flat_dim = filters * (in_dim // pool)
        rng = np.random.default_rng(init_seed)
        self.conv = Conv1dLayer.init(rng, 1, filters, kernel, padding="same",
                                     dtype=dtype)
        self.hidden = DenseLayer.init(rng, self.flat_dim, hidden_dim, dtype)
        self.output = DenseLayer.init(rng, hidden_dim, 2, dtype)

    def config(self):
        return {
            "in_dim": self.in_dim,
            "filters": self.filters,
            "kernel": self.kernel,
            "pool": self.pool,
            "hidden_dim": self.hidden_dim,
        }

    def parameters(self):
        return [self.conv.kernels, self.conv.bias,
                self.hidden.weights, self.hidden.bias,
                self.output.weights, self.output.bias]

    def set_parameters(self, values):
        for p, v in zip(self.parameters(), values):
            np.copyto(p, v)

    def astype(self, dtype):
        clone = CnnProbe.__new__(CnnProbe)
        clone.in_dim = self.in_dim
        clone.filters = self.filters
        clone.kernel = self.kernel
        clone.pool = self.pool
        clone.hidden_dim = self.hidden_dim
        clone.flat_dim = self.flat_dim
        clone.conv = self.conv.astype(dtype)
        clone.hidden = self.hidden.astype(dtype)
        clone.output = self.output.astype(dtype)
        return clone

    def _features(self, x):
        batch = np.atleast_2d(np.asarray(x))
        conv_out = nn.conv1d_forward(self.conv, batch[:, None, :])
        pooled = nn.maxpool1d(conv_out, self.pool)
        return batch, conv_out, pooled.reshape(len(batch), -1)

    def forward(self, x):
        single = np.asarray(x).ndim == 1
        _, _, flat = self._features(x)
        h = nn.relu(nn.dense_forward(self.hidden, flat))
        probs = nn.softmax(nn.dense_forward(self.output, h))
        return probs[0] if single else probs

    def loss_and_grads(self, x, labels):
        batch, conv_out, flat = self._features(x)
        z1 = nn.dense_forward(self.hidden, flat)
        a1 = nn.relu(z1)
        probs = nn.softmax(nn.dense_forward(self.output, a1))
        loss = nn.batch_cross_entropy(probs, labels)
        g2 = nn.softmax_cross_entropy_grad(probs, labels)
        gw2, gb2, ga1 = nn.dense_backward(self.output, a1, g2)
        g1 = nn.relu_backward(z1, ga1)
        gw1, gb1, gflat = nn.dense_backward(self.hidden, flat, g1)
        gpooled = gflat.reshape(len(batch), self.filters, self.in_dim // self.pool)
        gconv = nn.maxpool1d_backward(conv_out, self.pool, gpooled)
        gk, gcb, _ = nn.conv1d_backward(self.conv, batch[:, None, :], gconv)
        return loss, [gk, gcb, gw1, gb1, gw2, gb2]


PROBE_KINDS = {"fcn": FcnProbe, "cnn": CnnProbe}


def build_probe(kind: str, in_dim: int, hyper: TrainingHyper, **model_kw):
    if kind not in PROBE_KINDS:
        raise ValueError(f"unknown probe kind {kind!r}; expected fcn or cnn")
    return PROBE_KINDS[kind](in_dim, init_seed=hyper.init_seed, **model_kw)


def train_probe(kind: str, train: EmbeddingCorpus, val: EmbeddingCorpus,
                hyper: TrainingHyper, **model_kw):
    """Train a probe on `train`, selecting the best epoch by `val` EER.

    Returns (probe, TrainHistory). The probe's parameters are the snapshot
    from the epoch with the lowest validation EER.
    """
    if train.dim != val.dim:
        raise ValueError(f"train dim {train.dim} != val dim {val.dim}")
    if not train.has_both_labels():
        raise ValueError("training corpus must contain both labels")
    x_train, y_train, _ = train.to_matrix()
    probe = build_probe(kind, train.dim, hyper, **model_kw)

    def batch_fn(idx):
        return x_train[idx], y_train[idx]

    def val_eer():
        return compute_eer(score(probe, val)).eer

    history = fit(probe, len(train), batch_fn, val_eer, hyper)
    return probe, history


def score(probe, corpus: EmbeddingCorpus) -> ScoreSet:
    """Spoof-class probability per record, order preserved."""
    if corpus.dim != probe.in_dim:
        raise ValueError(f"corpus dim {corpus.dim} != probe in_dim {probe.in_dim}")
    x, y, ids = corpus.to_matrix()
    scores = np.empty(len(x), dtype=np.float64)
    for start in range(0, len(x), SCORE_BATCH):
        probs = probe.forward(x[start : start + SCORE_BATCH])
        scores[start : start + SCORE_BATCH] = probs[:, 1]
    return ScoreSet(ids, y, scores)


def save_probe(probe, path, hyper: TrainingHyper | None = None) -> None:
    header = {"config": probe.config(),
              "hyper": hyper.to_dict() if hyper else None}
    write_checkpoint(path, probe.arch_tag, header, probe.parameters())


def load_probe(path):
    arch_tag, header, tensors = read_checkpoint(path)
    if arch_tag == ARCH_FCN:
        probe = FcnProbe(**header["config"])
    elif arch_tag == ARCH_CNN:
        probe = CnnProbe(**header["config"])
    else:
        raise ValueError(f"checkpoint holds architecture tag {arch_tag}, "
                         "not a probe")
    probe.set_parameters(tensors)
    return probe
