"""Single-normalizer forward passes: normalize by the scope's statistics, then
scale by ``gamma`` and shift by ``beta`` per channel."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError, ShapeError
from .stats import NormStats, Scope, stats_direct
from .tensor import as_tensor4

__all__ = ["AffineParams", "broadcast_stat", "normalize_forward"]

DEFAULT_EPS = 1e-5


@dataclass
class AffineParams:
    gamma: np.ndarray
    beta: np.ndarray
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=np.float64).reshape(-1)
        self.beta = np.asarray(self.beta, dtype=np.float64).reshape(-1)
        if self.gamma.shape != self.beta.shape:
            raise ShapeError(f"gamma {self.gamma.shape} and beta {self.beta.shape} differ")
        # eps = 0 is allowed for exact identities on inputs with nonzero variance
        if not self.eps >= 0.0:
            raise ParameterError(f"eps must be >= 0, got {self.eps}")

    @classmethod
    def identity(cls, channels: int, eps: float = DEFAULT_EPS) -> "AffineParams":
        return cls(np.ones(channels), np.zeros(channels), eps)


def broadcast_stat(values: np.ndarray, scope: Scope, shape) -> np.ndarray:
    """Reshape a statistic so it broadcasts against an (N, C, H, W) tensor."""
    n, c, _, _ = shape
    scope = Scope(scope)
    if scope is Scope.IN:
        return values.reshape(n, c, 1, 1)
    if scope is Scope.LN:
        return values.reshape(n, 1, 1, 1)
    if scope is Scope.BN:
        return values.reshape(1, c, 1, 1)
    groups = values.shape[1]
    return np.repeat(values, c // groups, axis=1).reshape(n, c, 1, 1)


def normalize_forward(x, scope, params: AffineParams,
                      group_count: Optional[int] = None,
                      stats: Optional[NormStats] = None) -> np.ndarray:
    """Apply one normalizer.  ``stats`` overrides the batch statistics when given."""
    x = as_tensor4(x)
    c = x.shape[1]
    if params.gamma.size != c:
        raise ShapeError(f"gamma/beta have {params.gamma.size} entries, tensor has C={c}")
    if stats is None:
        stats = stats_direct(x, scope, group_count)
    mu = broadcast_stat(stats.mu, stats.scope, x.shape)
    var = broadcast_stat(stats.var, stats.scope, x.shape)
    xhat = (x - mu) / np.sqrt(var + params.eps)
    return params.gamma.reshape(1, c, 1, 1) * xhat + params.beta.reshape(1, c, 1, 1)
