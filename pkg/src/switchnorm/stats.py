"""Population means and variances for IN, LN, BN and GN.

Shapes of the returned statistics:

====  =========  =====================================
IN    (N, C)     over (H, W) of each sample and channel
LN    (N,)       over (C, H, W) of each sample
BN    (C,)       over (N, H, W) of each channel
GN    (N, g)     over (C/g, H, W) of each sample and group
====  =========  =====================================

Variances divide by the pixel count (no Bessel correction).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .tensor import as_tensor4

__all__ = ["NormStats", "Scope", "stats_direct", "stats_reuse"]


class Scope(str, enum.Enum):
    IN = "in"
    LN = "ln"
    BN = "bn"
    GN = "gn"


@dataclass(frozen=True)
class NormStats:
    scope: Scope
    mu: np.ndarray
    var: np.ndarray
    group_count: Optional[int] = None

    @property
    def count(self) -> int:
        """Number of stored statistics (means plus variances)."""
        return self.mu.size + self.var.size


def _check_groups(scope: Scope, channels: int, group_count: Optional[int]) -> None:
    if scope is Scope.GN:
        if group_count is None or group_count < 1 or channels % group_count:
            raise ConfigurationError(
                f"GN needs a group count dividing C={channels}, got {group_count}")
    elif group_count is not None:
        raise ConfigurationError(f"group_count only applies to GN, not {scope.value}")


def _moments(view: np.ndarray, axes: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    mu = view.mean(axis=axes)
    centered = view - np.expand_dims(mu, axes)
    var = (centered * centered).mean(axis=axes)
    return mu, var


def stats_direct(x, scope, group_count: Optional[int] = None) -> NormStats:
    """Two-pass mean/variance over the pixel set of ``scope``."""
    x = as_tensor4(x)
    scope = Scope(scope)
    n, c, h, w = x.shape
    _check_groups(scope, c, group_count)

    if scope is Scope.IN:
        mu, var = _moments(x, (2, 3))
    elif scope is Scope.LN:
        mu, var = _moments(x, (1, 2, 3))
    elif scope is Scope.BN:
        mu, var = _moments(x, (0, 2, 3))
    else:
        grouped = x.reshape(n, group_count, c // group_count, h, w)
        mu, var = _moments(grouped, (2, 3, 4))
    return NormStats(scope, mu, var, group_count)


def stats_reuse(x) -> tuple[NormStats, NormStats, NormStats]:
    """IN statistics from the data, then LN and BN derived from them.

    LN and BN are reductions of the (N, C) IN moments, so the whole thing is
    one pass over the tensor plus O(NC) work::

        mu_ln  = mean_c mu_in      var_ln = mean_c(var_in + mu_in**2) - mu_ln**2
        mu_bn  = mean_n mu_in      var_bn = mean_n(var_in + mu_in**2) - mu_bn**2
    """
    x = as_tensor4(x)
    mu_in, var_in = _moments(x, (2, 3))
    second = var_in + mu_in * mu_in

    mu_ln = mu_in.mean(axis=1)
    var_ln = np.maximum(second.mean(axis=1) - mu_ln * mu_ln, 0.0)
    mu_bn = mu_in.mean(axis=0)
    var_bn = np.maximum(second.mean(axis=0) - mu_bn * mu_bn, 0.0)

    return (
        NormStats(Scope.IN, mu_in, var_in),
        NormStats(Scope.LN, mu_ln, var_ln),
        NormStats(Scope.BN, mu_bn, var_bn),
    )
