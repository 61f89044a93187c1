"""Two-branch fusion model over paired embeddings.

Each branch runs the CNN probe front end (conv, maxpool, flatten) on its
own embedding, then a linear projection down to a shared width. The two
projected vectors are combined by bilinear pooling (their outer product),
flattened row-major, and classified by a relu dense layer plus a 2-way
softmax head. The outer product is rank 1 but exposes every pairwise
feature interaction to the head, which is what lets two individually weak
representations cover for each other.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .corpus import AlignedPair
from .metrics import ScoreSet, compute_eer
from .nn import (
    ARCH_MIO,
    Conv1dLayer,
    DenseLayer,
    TrainingHyper,
    read_checkpoint,
    write_checkpoint,
)
from .training import TrainHistory, fit

DEFAULT_PROJ_DIM = 120

SCORE_BATCH = 256


def bilinear_pool(p, q):
    """Outer product of two equal-length vectors (or of two [n, d] batches)."""
    p = np.asarray(p)
    q = np.asarray(q)
    if p.shape[-1] != q.shape[-1]:
        raise ValueError(
            f"bilinear pooling needs equal lengths, got {p.shape[-1]} and "
            f"{q.shape[-1]}"
        )
    if p.ndim == 1:
        return np.outer(p, q)
    return np.einsum("ni,nj->nij", p, q)


class _Branch:
    """conv -> pool -> flatten -> linear projection for one input."""

    def __init__(self, rng, in_dim, filters, kernel, pool, proj_dim, dtype):
        if in_dim < pool:
            raise ValueError(f"branch dim {in_dim} shorter than pool window {pool}")
        self.in_dim = in_dim
        self.pool = pool
        self.flat_dim = filters * (in_dim // pool)
        self.conv = Conv1dLayer.init(rng, 1, filters, kernel, padding="same",
                                     dtype=dtype)
        self.proj = DenseLayer.init(rng, self.flat_dim, proj_dim, dtype)

    def parameters(self):
        return [self.conv.kernels, self.conv.bias,
                self.proj.weights, self.proj.bias]

    def astype(self, dtype):
        clone = _Branch.__new__(_Branch)
        clone.in_dim = self.in_dim
        clone.pool = self.pool
        clone.flat_dim = self.flat_dim
        clone.conv = self.conv.astype(dtype)
        clone.proj = self.proj.astype(dtype)
        return clone

    def forward(self, x):
        conv_out = nn.conv1d_forward(self.conv, x[:, None, :])
        pooled = nn.maxpool1d(conv_out, self.pool)
        flat = pooled.reshape(len(x), -1)
        return conv_out, flat, nn.dense_forward(self.proj, flat)

    def backward(self, x, conv_out, flat, grad_proj):
        gw, gb, gflat = nn.dense_backward(self.proj, flat, grad_proj)
        gpooled = gflat.reshape(conv_out.shape[0], conv_out.shape[1], -1)
        gconv = nn.maxpool1d_backward(conv_out, self.pool, gpooled)
        gk, gcb, _ = nn.conv1d_backward(self.conv, x[:, None, :], gconv)
        return [gk, gcb, gw, gb]


class MioModel:
    """Branch CNNs, linear projections, bilinear pooling, dense head."""

    arch_tag = ARCH_MIO

    def __init__(self, dim_a: int, dim_b: int, proj_dim: int = DEFAULT_PROJ_DIM,
                 filters: int = 32, kernel: int = 3, pool: int = 2,
                 head_hidden: int = 256, init_seed: int = 0, dtype=np.float32):
        self.dim_a = dim_a
        self.dim_b = dim_b
        self.proj_dim = proj_dim
        self.filters = filters
        self.kernel = kernel
        self.pool = pool
        self.head_hidden = head_hidden
        rng = np.random.default_rng(init_seed)
        self.branch_a = _Branch(rng, dim_a, filters, kernel, pool, proj_dim, dtype)
        self.branch_b = _Branch(rng, dim_b, filters, kernel, pool, proj_dim, dtype)
        self.head = DenseLayer.init(rng, proj_dim * proj_dim, head_hidden, dtype)
        self.output = DenseLayer.init(rng, head_hidden, 2, dtype)

    def config(self):
        return {
            "dim_a": self.dim_a,
            "dim_b": self.dim_b,
            "proj_dim": self.proj_dim,
            "filters": self.filters,
            "kernel": self.kernel,
            "pool": self.pool,
            "head_hidden": self.head_hidden,
        }

    def parameters(self):
        return (self.branch_a.parameters() + self.branch_b.parameters()
                + [self.head.weights, self.head.bias,
                   self.output.weights, self.output.bias])

    def set_parameters(self, values):
        for p, v in zip(self.parameters(), values):
            np.copyto(p, v)

    def astype(self, dtype):
        clone = MioModel.__new__(MioModel)
        clone.dim_a = self.dim_a
        clone.dim_b = self.dim_b
        clone.proj_dim = self.proj_dim
        clone.filters = self.filters
        clone.kernel = self.kernel
        clone.pool = self.pool
        clone.head_hidden = self.head_hidden
        clone.branch_a = self.branch_a.astype(dtype)
        clone.branch_b = self.branch_b.astype(dtype)
        clone.head = self.head.astype(dtype)
        clone.output = self.output.astype(dtype)
        return clone

    def forward(self, x_a, x_b):
        x_a = np.asarray(x_a)
        single = x_a.ndim == 1
        batch_a = np.atleast_2d(x_a)
        batch_b = np.atleast_2d(np.asarray(x_b))
        if len(batch_a) != len(batch_b):
            raise ValueError("branch batches must have equal length")
        _, _, proj_a = self.branch_a.forward(batch_a)
        _, _, proj_b = self.branch_b.forward(batch_b)
        fused = bilinear_pool(proj_a, proj_b).reshape(len(batch_a), -1)
        h = nn.relu(nn.dense_forward(self.head, fused))
        probs = nn.softmax(nn.dense_forward(self.output, h))
        return probs[0] if single else probs

    def loss_and_grads(self, x_a, x_b, labels):
        conv_a, flat_a, proj_a = self.branch_a.forward(x_a)
        conv_b, flat_b, proj_b = self.branch_b.forward(x_b)
        fused = bilinear_pool(proj_a, proj_b).reshape(len(x_a), -1)
        z1 = nn.dense_forward(self.head, fused)
        a1 = nn.relu(z1)
        probs = nn.softmax(nn.dense_forward(self.output, a1))
        loss = nn.batch_cross_entropy(probs, labels)

        g2 = nn.softmax_cross_entropy_grad(probs, labels)
        gwo, gbo, ga1 = nn.dense_backward(self.output, a1, g2)
        g1 = nn.relu_backward(z1, ga1)
        gwh, gbh, gfused = nn.dense_backward(self.head, fused, g1)
        gouter = gfused.reshape(len(x_a), self.proj_dim, self.proj_dim)
        gproj_a = np.einsum("nij,nj->ni", gouter, proj_b)
        gproj_b = np.einsum("nij,ni->nj", gouter, proj_a)
        grads_a = self.branch_a.backward(x_a, conv_a, flat_a, gproj_a)
        grads_b = self.branch_b.backward(x_b, conv_b, flat_b, gproj_b)
        return loss, grads_a + grads_b + [gwh, gbh, gwo, gbo]


def mio_forward(model: MioModel, x_a, x_b):
    """Probability vector [bonafide, spoof] for one pair of embeddings."""
    return model.forward(x_a, x_b)


def _pair_matrices(pairs: list[AlignedPair]):
    if not pairs:
        raise ValueError("empty pair list")
    x_a = np.stack([p.vector_a for p in pairs]).astype(np.float32)
    x_b = np.stack([p.vector_b for p in pairs]).astype(np.float32)
    y = np.array([p.label for p in pairs], dtype=np.int64)
    ids = [p.clip_id for p in pairs]
    return x_a, x_b, y, ids


def train_mio(train_pairs: list[AlignedPair], val_pairs: list[AlignedPair],
              hyper: TrainingHyper, proj_dim: int = DEFAULT_PROJ_DIM,
              **model_kw):
    """Train the fusion model on aligned pairs; same contract as train_probe."""
    x_a, x_b, y, _ = _pair_matrices(train_pairs)
    if len(set(y.tolist())) < 2:
        raise ValueError("training pairs must contain both labels")
    model = MioModel(x_a.shape[1], x_b.shape[1], proj_dim=proj_dim,
                     init_seed=hyper.init_seed, **model_kw)

    def batch_fn(idx):
        return x_a[idx], x_b[idx], y[idx]

    def val_eer():
        return compute_eer(score_mio(model, val_pairs)).eer

    history = fit(model, len(train_pairs), batch_fn, val_eer, hyper)
    return model, history


def score_mio(model: MioModel, pairs: list[AlignedPair]) -> ScoreSet:
    """Spoof-class probability per aligned pair, order preserved."""
    x_a, x_b, y, ids = _pair_matrices(pairs)
    if x_a.shape[1] != model.dim_a or x_b.shape[1] != model.dim_b:
        raise ValueError(
            f"pair dims ({x_a.shape[1]}, {x_b.shape[1]}) do not match model "
            f"({model.dim_a}, {model.dim_b})"
        )
    scores = np.empty(len(ids), dtype=np.float64)
    for start in range(0, len(ids), SCORE_BATCH):
        probs = model.forward(x_a[start : start + SCORE_BATCH],
                              x_b[start : start + SCORE_BATCH])
        scores[start : start + SCORE_BATCH] = probs[:, 1]
    return ScoreSet(ids, y, scores)


def save_mio(model: MioModel, path, hyper: TrainingHyper | None = None) -> None:
    header = {"config": model.config(),
              "hyper": hyper.to_dict() if hyper else None}
    write_checkpoint(path, ARCH_MIO, header, model.parameters())


def load_mio(path) -> MioModel:
    arch_tag, header, tensors = read_checkpoint(path)
    if arch_tag != ARCH_MIO:
        raise ValueError(f"checkpoint holds architecture tag {arch_tag}, "
                         "not a fusion model")
    model = MioModel(**header["config"])
    model.set_parameters(tensors)
    return model
