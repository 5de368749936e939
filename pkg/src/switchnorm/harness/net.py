"""A tiny conv net: [conv3x3 -> SN -> ReLU] x depth -> global average pool -> linear."""

from __future__ import annotations

from typing import Iterator, Optional, Sequence

import numpy as np

from ..normalizers import DEFAULT_EPS
from ..snlayer import (InferenceState, SnParams, calibrate_batch_average, sn_backward,
                       sn_forward, update_moving_average)
from ..tensor import Rng


def conv3x3_forward(x: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """Direct 'same' convolution with zero padding, no bias.

    The sum runs explicitly over the nine kernel taps; each tap is a channel
    contraction over every output pixel.
    """
    n, _, h, w = x.shape
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros((n, weight.shape[0], h, w))
    for di in range(3):
        for dj in range(3):
            window = padded[:, :, di:di + h, dj:dj + w]
            out += np.einsum("nchw,oc->nohw", window, weight[:, :, di, dj])
    return out


def conv3x3_backward(d_out: np.ndarray, x: np.ndarray, weight: np.ndarray):
    n, _, h, w = x.shape
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    d_padded = np.zeros_like(padded)
    d_weight = np.zeros_like(weight)
    for di in range(3):
        for dj in range(3):
            window = padded[:, :, di:di + h, dj:dj + w]
            d_weight[:, :, di, dj] = np.einsum("nohw,nchw->oc", d_out, window)
            d_padded[:, :, di:di + h, dj:dj + w] += np.einsum(
                "nohw,oc->nchw", d_out, weight[:, :, di, dj])
    return d_padded[:, :, 1:-1, 1:-1], d_weight


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean loss over the batch and its gradient w.r.t. the logits."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    n = labels.size
    loss = -log_probs[np.arange(n), labels].mean()
    grad = np.exp(log_probs)
    grad[np.arange(n), labels] -= 1.0
    return float(loss), grad / n


class ToyNet:
    def __init__(self, rng: Rng, in_channels: int, classes: int, width: int = 8,
                 depth: int = 2, eps: float = DEFAULT_EPS, momentum: float = 0.9):
        self.convs: list[np.ndarray] = []
        self.sn: list[SnParams] = []
        self.running: list[InferenceState] = []
        c_in = in_channels
        for _ in range(depth):
            std = np.sqrt(2.0 / (9 * c_in))
            self.convs.append(std * rng.normal(width * c_in * 9).reshape(width, c_in, 3, 3))
            self.sn.append(SnParams.init(width, eps))
            self.running.append(InferenceState.moving_average(width, momentum))
            c_in = width
        self.fc_w = np.sqrt(1.0 / width) * rng.normal(classes * width).reshape(classes, width)
        self.fc_b = np.zeros(classes)
        self._tape = None

    @property
    def depth(self) -> int:
        return len(self.convs)

    def parameters(self) -> Iterator[tuple[str, str, np.ndarray]]:
        """(name, decay group, array) for every trainable array, in a fixed order.

        Arrays are yielded by reference so optimizers update them in place.
        Sparse SN layers keep their control parameters frozen.
        """
        for i, (w, p) in enumerate(zip(self.convs, self.sn)):
            yield f"conv{i}", "main", w
            yield f"sn{i}.gamma", "affine", p.gamma
            yield f"sn{i}.beta", "affine", p.beta
            if not p.sparse:
                yield f"sn{i}.lambda_mu", "lambda", p.lambda_mu
                yield f"sn{i}.lambda_var", "lambda", p.lambda_var
        yield "fc.w", "main", self.fc_w
        yield "fc.b", "main", self.fc_b

    def forward(self, x: np.ndarray, mode: str = "train",
                states: Optional[Sequence[InferenceState]] = None,
                track_running: bool = False) -> np.ndarray:
        """Logits for a batch.  Train mode records what backward needs;
        ``track_running`` also folds each layer's BN statistics into the
        moving averages."""
        tape = []
        h = x
        for i, (w, p) in enumerate(zip(self.convs, self.sn)):
            conv_in = h
            h = conv3x3_forward(h, w)
            if mode == "train":
                h, cache = sn_forward(h, p)
                if track_running:
                    self.running[i] = update_moving_average(self.running[i], cache.stats[2])
            else:
                h, cache = sn_forward(h, p, "eval", states[i])
            relu_mask = h > 0
            h = h * relu_mask
            tape.append((conv_in, cache, relu_mask))
        pooled = h.mean(axis=(2, 3))
        self._tape = (tape, pooled, h.shape) if mode == "train" else None
        return pooled @ self.fc_w.T + self.fc_b

    def backward(self, d_logits: np.ndarray) -> dict[str, np.ndarray]:
        if self._tape is None:
            raise RuntimeError("backward needs a preceding train-mode forward")
        tape, pooled, shape = self._tape
        grads = {"fc.w": d_logits.T @ pooled, "fc.b": d_logits.sum(axis=0)}
        n, c, h, w = shape
        d_h = np.broadcast_to((d_logits @ self.fc_w)[:, :, None, None] / (h * w), shape)
        for i in reversed(range(self.depth)):
            conv_in, cache, relu_mask = tape[i]
            g = sn_backward(d_h * relu_mask, cache, self.sn[i])
            grads[f"sn{i}.gamma"] = g.d_gamma
            grads[f"sn{i}.beta"] = g.d_beta
            grads[f"sn{i}.lambda_mu"] = g.d_lambda_mu
            grads[f"sn{i}.lambda_var"] = g.d_lambda_var
            d_h, grads[f"conv{i}"] = conv3x3_backward(g.d_input, conv_in, self.convs[i])
        return grads

    def batch_bn_stats(self, x: np.ndarray):
        """BN statistics seen by each SN layer in a train-mode forward.
        Leaves parameters and running averages untouched."""
        collected = []
        h = x
        for w, p in zip(self.convs, self.sn):
            h, cache = sn_forward(conv3x3_forward(h, w), p)
            collected.append(cache.stats[2])
            h = np.maximum(h, 0.0)
        return collected

    def calibrate(self, batches, sample_batches: int = 50) -> list[InferenceState]:
        return calibrate_batch_average(self, (b.x for b in batches), sample_batches)

    def predict(self, x: np.ndarray, states: Sequence[InferenceState]) -> np.ndarray:
        return self.forward(x, "eval", states).argmax(axis=1)
