"""Minimal dense/conv1d network core with hand-derived gradients.

Only what the three model shapes need: dense and 1-D convolution layers,
non-overlapping max pooling, relu, a numerically stable softmax fused
with cross-entropy, and Adam. There is no general autodiff; each model
chains the per-layer backward functions below, and every backward is
validated against central finite differences on a float64 copy of the
model.

Parameters are float32. All forward/backward functions follow the dtype
of their inputs, so converting a model to float64 gives the slow exact
path used by the gradient checks.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MIOM_MAGIC = b"MIOM"
MIOM_VERSION = 1

ARCH_FCN = 1
ARCH_CNN = 2
ARCH_MIO = 3

PROB_FLOOR = 1e-12


def glorot_uniform(rng, shape, fan_in, fan_out, dtype=np.float32):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


@dataclass
class DenseLayer:
    weights: np.ndarray  # [out_dim, in_dim]
    bias: np.ndarray  # [out_dim]

    @classmethod
    def init(cls, rng, in_dim, out_dim, dtype=np.float32):
        return cls(
            weights=glorot_uniform(rng, (out_dim, in_dim), in_dim, out_dim, dtype),
            bias=np.zeros(out_dim, dtype=dtype),
        )

    def astype(self, dtype):
        return DenseLayer(self.weights.astype(dtype), self.bias.astype(dtype))


@dataclass
class Conv1dLayer:
    kernels: np.ndarray  # [filters, in_channels, kernel_width]
    bias: np.ndarray  # [filters]
    stride: int = 1
    padding: str = "same"  # or "valid"

    @classmethod
    def init(cls, rng, in_channels, filters, kernel_width, padding="same",
             stride=1, dtype=np.float32):
        fan_in = in_channels * kernel_width
        fan_out = filters * kernel_width
        return cls(
            kernels=glorot_uniform(
                rng, (filters, in_channels, kernel_width), fan_in, fan_out, dtype
            ),
            bias=np.zeros(filters, dtype=dtype),
            stride=stride,
            padding=padding,
        )

    def astype(self, dtype):
        return Conv1dLayer(
            self.kernels.astype(dtype), self.bias.astype(dtype),
            self.stride, self.padding,
        )


def dense_forward(layer: DenseLayer, x):
    """y = W x + b, for a single vector or a [n, in_dim] batch."""
    x = np.asarray(x)
    if x.shape[-1] != layer.weights.shape[1]:
        raise ValueError(
            f"dense input has {x.shape[-1]} features, layer expects "
            f"{layer.weights.shape[1]}"
        )
    return x @ layer.weights.T + layer.bias


def dense_backward(layer: DenseLayer, x, grad_out):
    """Gradients (dW, db, dx) for a batch; grads sum over the batch."""
    x = np.atleast_2d(x)
    grad_out = np.atleast_2d(grad_out)
    grad_w = grad_out.T @ x
    grad_b = grad_out.sum(axis=0)
    grad_x = grad_out @ layer.weights
    return grad_w, grad_b, grad_x


def _pad_same(x, kernel_width):
    total = kernel_width - 1
    left = total // 2
    return np.pad(x, [(0, 0)] * (x.ndim - 1) + [(left, total - left)]), left


def conv1d_forward(layer: Conv1dLayer, x):
    """Cross-correlation plus bias.

    x is [in_channels, length] or [n, in_channels, length]; output length
    is `length` for same padding or `length - kernel_width + 1` for valid
    (stride 1; larger strides subsample that result).
    """
    x = np.asarray(x)
    single = x.ndim == 2
    if single:
        x = x[None]
    filters, in_channels, kernel_width = layer.kernels.shape
    if x.shape[1] != in_channels:
        raise ValueError(
            f"conv input has {x.shape[1]} channels, layer expects {in_channels}"
        )
    if layer.padding == "same":
        xp, _ = _pad_same(x, kernel_width)
    elif layer.padding == "valid":
        if x.shape[2] < kernel_width:
            raise ValueError(
                f"input length {x.shape[2]} shorter than kernel {kernel_width}"
            )
        xp = x
    else:
        raise ValueError(f"unknown padding {layer.padding!r}")
    windows = np.lib.stride_tricks.sliding_window_view(xp, kernel_width, axis=2)
    y = np.einsum("nclk,fck->nfl", windows, layer.kernels)
    y = y + layer.bias[:, None]
    if layer.stride != 1:
        y = y[:, :, :: layer.stride]
    return y[0] if single else y


def conv1d_backward(layer: Conv1dLayer, x, grad_out):
    """Gradients (dK, db, dx); grads sum over the batch."""
    x = np.asarray(x)
    if x.ndim == 2:
        x = x[None]
    grad_out = np.asarray(grad_out)
    if grad_out.ndim == 2:
        grad_out = grad_out[None]
    filters, in_channels, kernel_width = layer.kernels.shape
    if layer.stride != 1:
        full_len = (
            x.shape[2] if layer.padding == "same" else x.shape[2] - kernel_width + 1
        )
        spread = np.zeros(grad_out.shape[:2] + (full_len,), dtype=grad_out.dtype)
        spread[:, :, :: layer.stride] = grad_out
        grad_out = spread
    if layer.padding == "same":
        xp, pad_left = _pad_same(x, kernel_width)
    else:
        xp, pad_left = x, 0
    windows = np.lib.stride_tricks.sliding_window_view(xp, kernel_width, axis=2)
    grad_k = np.einsum("nclk,nfl->fck", windows, grad_out)
    grad_b = grad_out.sum(axis=(0, 2))
    # full correlation of grad_out with flipped kernels recovers dx
    gp = np.pad(grad_out, [(0, 0), (0, 0), (kernel_width - 1, kernel_width - 1)])
    gwin = np.lib.stride_tricks.sliding_window_view(gp, kernel_width, axis=2)
    grad_xp = np.einsum("nflk,fck->ncl", gwin, layer.kernels[:, :, ::-1])
    grad_x = grad_xp[:, :, pad_left : pad_left + x.shape[2]]
    return grad_k, grad_b, grad_x


def maxpool1d(x, window: int):
    """Non-overlapping window maxima; a trailing remainder is dropped."""
    x = np.asarray(x)
    if window < 1:
        raise ValueError("window must be >= 1")
    length = x.shape[-1]
    if window > length:
        raise ValueError(f"window {window} exceeds input length {length}")
    out_len = length // window
    trimmed = x[..., : out_len * window]
    return trimmed.reshape(x.shape[:-1] + (out_len, window)).max(axis=-1)


def maxpool1d_backward(x, window: int, grad_out):
    """Route each window's gradient to its first maximal element."""
    x = np.asarray(x)
    grad_out = np.asarray(grad_out)
    length = x.shape[-1]
    out_len = length // window
    trimmed = x[..., : out_len * window].reshape(x.shape[:-1] + (out_len, window))
    winners = trimmed.argmax(axis=-1)  # first max on ties
    grad_win = np.zeros_like(trimmed, dtype=grad_out.dtype)
    np.put_along_axis(grad_win, winners[..., None], grad_out[..., None], axis=-1)
    grad_x = np.zeros(x.shape, dtype=grad_out.dtype)
    grad_x[..., : out_len * window] = grad_win.reshape(x.shape[:-1] + (out_len * window,))
    return grad_x


def relu(x):
    return np.maximum(x, 0)


def relu_backward(x, grad_out):
    return grad_out * (x > 0)


def softmax(z):
    """Stable softmax along the last axis; entries in (0, 1], rows sum to 1."""
    z = np.asarray(z)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs, label: int) -> float:
    """-log p[label], with the probability floored at 1e-12."""
    probs = np.asarray(probs)
    if not 0 <= label < probs.shape[-1]:
        raise ValueError(f"label {label} out of range for {probs.shape[-1]} classes")
    return float(-np.log(max(float(probs[label]), PROB_FLOOR)))


def batch_cross_entropy(probs, labels):
    """Mean -log p[label] over a batch."""
    picked = probs[np.arange(len(labels)), labels]
    return float(np.mean(-np.log(np.maximum(picked, PROB_FLOOR))))


def softmax_cross_entropy_grad(probs, labels):
    """Gradient of mean cross-entropy w.r.t. the logits: (p - onehot) / n."""
    grad = probs.copy()
    grad[np.arange(len(labels)), labels] -= 1
    return grad / len(labels)


@dataclass
class TrainingHyper:
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    shuffle_seed: int = 0
    init_seed: int = 0

    def validate(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def to_dict(self):
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
            "shuffle_seed": self.shuffle_seed,
            "init_seed": self.init_seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d[k] for k in cls().to_dict() if k in d})


class AdamState:
    """First/second moment buffers plus step count for one parameter list."""

    def __init__(self, params, learning_rate=1e-3, beta1=0.9, beta2=0.999,
                 epsilon=1e-8):
        self.first_moment = [np.zeros_like(p) for p in params]
        self.second_moment = [np.zeros_like(p) for p in params]
        self.step_count = 0
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon

    @classmethod
    def from_hyper(cls, params, hyper: TrainingHyper):
        return cls(params, hyper.learning_rate, hyper.beta1, hyper.beta2,
                   hyper.epsilon)


def adam_step(params, grads, state: AdamState):
    """One bias-corrected Adam update, applied to `params` in place."""
    state.step_count += 1
    t = state.step_count
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)


def write_checkpoint(path, arch_tag: int, header: dict, tensors) -> None:
    """MIOM v1 container: arch tag, JSON header, float32 tensors.

    Layout: magic "MIOM", version u16, arch u8, header length u32 + UTF-8
    JSON, tensor count u32, then per tensor ndim u8, each dim u32, and the
    float32 data. Little-endian throughout; byte-deterministic.
    """
    buf = bytearray()
    buf += MIOM_MAGIC
    buf += struct.pack("<HB", MIOM_VERSION, arch_tag)
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    buf += struct.pack("<I", len(raw))
    buf += raw
    tensors = list(tensors)
    buf += struct.pack("<I", len(tensors))
    for t in tensors:
        t = np.asarray(t)
        buf += struct.pack("<B", t.ndim)
        for d in t.shape:
            buf += struct.pack("<I", d)
        buf += t.astype("<f4", copy=False).tobytes()
    Path(path).write_bytes(bytes(buf))


def read_checkpoint(path):
    """Return (arch_tag, header dict, list of float32 tensors)."""
    data = Path(path).read_bytes()
    if data[:4] != MIOM_MAGIC:
        raise ValueError(f"{Path(path)}: bad checkpoint magic {data[:4]!r}")
    version, arch_tag = struct.unpack_from("<HB", data, 4)
    if version != MIOM_VERSION:
        raise ValueError(f"{Path(path)}: unsupported checkpoint version {version}")
    offset = 7
    (header_len,) = struct.unpack_from("<I", data, offset)
    offset += 4
    header = json.loads(data[offset : offset + header_len].decode("utf-8"))
    offset += header_len
    (count,) = struct.unpack_from("<I", data, offset)
    offset += 4
    tensors = []
    for _ in range(count):
        (ndim,) = struct.unpack_from("<B", data, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", data, offset)
        offset += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        tensor = np.frombuffer(data, dtype="<f4", count=size, offset=offset)
        offset += 4 * size
        tensors.append(tensor.reshape(shape).copy())
    if offset != len(data):
        raise ValueError(f"{Path(path)}: trailing bytes in checkpoint")
    return arch_tag, header, tensors
