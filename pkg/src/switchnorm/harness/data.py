from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from ..tensor import Rng


@dataclass
class Dataset:
    x: np.ndarray  # (S, C, H, W)
    y: np.ndarray  # (S,) int labels

    def __len__(self) -> int:
        return self.y.size

    def subset(self, idx) -> "Dataset":
        return Dataset(self.x[idx], self.y[idx])


def synth_dataset(rng: Rng, classes: int, samples: int, c: int, h: int, w: int,
                  noise: float = 1.0, channel_spread: float = 3.0) -> Dataset:
    """Class-conditional Gaussian blobs over per-channel mean patterns.

    Each class owns a random unit-norm pattern over channels; a sample is its
    class pattern broadcast over the spatial grid plus i.i.d. Gaussian pixel
    noise of std ``noise``.  On top of that every channel gets a fixed
    dataset-wide offset and scale (drawn once, magnitude ``channel_spread``),
    so channels live on very different ranges.  Labels cycle through the
    classes before shuffling, giving an exactly balanced histogram when
    ``classes`` divides ``samples``.

    At ``noise=0`` the classes are separated by the (distinct) channel-mean
    vectors, hence linearly separable.
    """
    if classes < 2:
        raise ParameterError(f"need at least 2 classes, got {classes}")
    if samples < 1 or min(c, h, w) < 1:
        raise ParameterError("samples and dims must be >= 1")
    if noise < 0:
        raise ParameterError(f"noise must be >= 0, got {noise}")

    patterns = rng.normal(classes * c).reshape(classes, c)
    patterns /= np.linalg.norm(patterns, axis=1, keepdims=True)
    offsets = channel_spread * rng.normal(c)
    scales = np.exp(0.5 * channel_spread * (rng.uniform(c) - 0.5))

    labels = np.arange(samples) % classes
    labels = labels[rng.permutation(samples)]
    pixels = noise * rng.normal(samples * c * h * w).reshape(samples, c, h, w)
    x = (patterns[labels][:, :, None, None] + pixels) * scales[None, :, None, None] \
        + offsets[None, :, None, None]
    return Dataset(x, labels)


def minibatches(data: Dataset, size: int, rng: Rng):
    """Endless stream of minibatches, reshuffled every epoch; a trailing
    partial batch is dropped."""
    if size < 1 or size > len(data):
        raise ParameterError(f"minibatch size must lie in [1, {len(data)}], got {size}")
    while True:
        order = rng.permutation(len(data))
        for start in range(0, len(data) - size + 1, size):
            yield data.subset(order[start:start + size])
