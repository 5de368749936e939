"""Switchable Normalization layer.

The layer mixes IN, LN and BN statistics with two independent softmax
triplets, one for the means and one for the variances::

    mu    = w_in  * mu_in  + w_ln  * mu_ln  + w_bn  * mu_bn
    var   = w'_in * var_in + w'_ln * var_ln + w'_bn * var_bn
    out   = gamma * (x - mu) / sqrt(var + eps) + beta

with ``w = softmax(lambda_mu)`` and ``w' = softmax(lambda_var)``.  Both
triplets are shared by every channel of the layer.  The backward pass is
written out by hand; :mod:`switchnorm.harness.gradcheck` checks it against
central differences.
"""

from __future__ import annotations

import enum
import itertools
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataError, FormatError, ParameterError, ShapeError, StateError
from .normalizers import DEFAULT_EPS, broadcast_stat
from .stats import NormStats, Scope, stats_reuse
from .tensor import as_tensor4, read_tensor, write_tensor

__all__ = [
    "ForwardCache",
    "InferenceState",
    "InferenceMode",
    "SnGrads",
    "SnParams",
    "SnStack",
    "calibrate_batch_average",
    "load_sn_params",
    "save_sn_params",
    "sn_backward",
    "sn_forward",
    "sn_sparsify",
    "sn_weights",
    "update_moving_average",
]

SCOPES = (Scope.IN, Scope.LN, Scope.BN)
# Logit gap used when a triplet is collapsed onto one normalizer.
SATURATION = 40.0


def sn_weights(lam) -> np.ndarray:
    """Softmax of a control-parameter triplet, stable for large logits."""
    lam = np.asarray(lam, dtype=np.float64).reshape(-1)
    if lam.shape != (3,):
        raise ParameterError(f"expected 3 control parameters, got {lam.shape}")
    if not np.all(np.isfinite(lam)):
        raise ParameterError(f"control parameters must be finite, got {lam}")
    e = np.exp(lam - lam.max())
    return e / e.sum()


def _one_hot(lam) -> np.ndarray:
    w = np.zeros(3)
    w[int(np.argmax(lam))] = 1.0  # ties resolve to the first of IN, LN, BN
    return w


@dataclass
class SnParams:
    gamma: np.ndarray
    beta: np.ndarray
    lambda_mu: np.ndarray = field(default_factory=lambda: np.ones(3))
    lambda_var: np.ndarray = field(default_factory=lambda: np.ones(3))
    eps: float = DEFAULT_EPS
    # set by sn_sparsify: weights become an exact one-hot and the logits stop training
    sparse: bool = False

    def __post_init__(self):
        self.gamma = np.array(self.gamma, dtype=np.float64).reshape(-1)
        self.beta = np.array(self.beta, dtype=np.float64).reshape(-1)
        self.lambda_mu = np.array(self.lambda_mu, dtype=np.float64).reshape(-1)
        self.lambda_var = np.array(self.lambda_var, dtype=np.float64).reshape(-1)
        if self.gamma.shape != self.beta.shape:
            raise ShapeError(f"gamma {self.gamma.shape} and beta {self.beta.shape} differ")
        if self.lambda_mu.shape != (3,) or self.lambda_var.shape != (3,):
            raise ShapeError("lambda_mu and lambda_var must each hold 3 values")
        if not self.eps >= 0.0:
            raise ParameterError(f"eps must be >= 0, got {self.eps}")

    @classmethod
    def init(cls, channels: int, eps: float = DEFAULT_EPS) -> "SnParams":
        """gamma = 1, beta = 0 and all six control parameters = 1."""
        return cls(np.ones(channels), np.zeros(channels), eps=eps)

    @property
    def channels(self) -> int:
        return self.gamma.size

    @property
    def w_mu(self) -> np.ndarray:
        return _one_hot(self.lambda_mu) if self.sparse else sn_weights(self.lambda_mu)

    @property
    def w_var(self) -> np.ndarray:
        return _one_hot(self.lambda_var) if self.sparse else sn_weights(self.lambda_var)

    def copy(self) -> "SnParams":
        return replace(self, gamma=self.gamma.copy(), beta=self.beta.copy(),
                       lambda_mu=self.lambda_mu.copy(), lambda_var=self.lambda_var.copy())


@dataclass
class SnGrads:
    d_input: np.ndarray
    d_gamma: np.ndarray
    d_beta: np.ndarray
    d_lambda_mu: np.ndarray
    d_lambda_var: np.ndarray


class InferenceMode(str, enum.Enum):
    MOVING_AVERAGE = "moving_average"
    BATCH_AVERAGE = "batch_average"


@dataclass
class InferenceState:
    """Frozen BN statistics used at test time."""

    mode: InferenceMode
    bn_mu: np.ndarray
    bn_var: np.ndarray
    momentum: float = 0.9
    sample_batches: int = 0

    def __post_init__(self):
        self.mode = InferenceMode(self.mode)
        self.bn_mu = np.asarray(self.bn_mu, dtype=np.float64).reshape(-1)
        self.bn_var = np.asarray(self.bn_var, dtype=np.float64).reshape(-1)
        if self.bn_mu.shape != self.bn_var.shape:
            raise ShapeError("bn_mu and bn_var must have the same length")
        if np.any(self.bn_var < 0):
            raise ParameterError("bn_var entries must be >= 0")
        if self.mode is InferenceMode.MOVING_AVERAGE and not 0.0 < self.momentum < 1.0:
            raise ParameterError(f"momentum must lie in (0, 1), got {self.momentum}")

    @classmethod
    def moving_average(cls, channels: int, momentum: float = 0.9) -> "InferenceState":
        return cls(InferenceMode.MOVING_AVERAGE, np.zeros(channels), np.ones(channels),
                   momentum=momentum)


@dataclass
class ForwardCache:
    x: np.ndarray
    stats: tuple[NormStats, NormStats, NormStats]
    w_mu: np.ndarray
    w_var: np.ndarray
    mu: np.ndarray       # mixed mean, (N, C, 1, 1)
    var_eps: np.ndarray  # mixed variance + eps, (N, C, 1, 1)
    xhat: np.ndarray
    train: bool
    eps: float


def sn_forward(x, params: SnParams, mode: str = "train",
               state: Optional[InferenceState] = None) -> tuple[np.ndarray, ForwardCache]:
    """SN forward pass.

    In ``"train"`` mode all three statistics come from the minibatch.  In
    ``"eval"`` mode IN and LN are still computed per sample but the BN terms
    are taken from ``state``.
    """
    x = as_tensor4(x)
    n, c, h, w = x.shape
    if params.channels != c:
        raise ShapeError(f"layer has {params.channels} channels, input has C={c}")
    if mode not in ("train", "eval"):
        raise ParameterError(f"mode must be 'train' or 'eval', got {mode!r}")

    st_in, st_ln, st_bn = stats_reuse(x)
    if mode == "eval":
        if state is None:
            raise StateError("eval mode needs an InferenceState")
        if state.bn_mu.size != c:
            raise StateError(f"inference state has {state.bn_mu.size} channels, input has {c}")
        st_bn = NormStats(Scope.BN, state.bn_mu, state.bn_var)
    stats = (st_in, st_ln, st_bn)

    w_mu, w_var = params.w_mu, params.w_var
    mu = sum(wk * broadcast_stat(s.mu, s.scope, x.shape) for wk, s in zip(w_mu, stats))
    var = sum(wk * broadcast_stat(s.var, s.scope, x.shape) for wk, s in zip(w_var, stats))
    var_eps = var + params.eps
    xhat = (x - mu) / np.sqrt(var_eps)
    y = params.gamma.reshape(1, c, 1, 1) * xhat + params.beta.reshape(1, c, 1, 1)
    cache = ForwardCache(x, stats, w_mu, w_var, mu, var_eps, xhat, mode == "train", params.eps)
    return y, cache


def sn_backward(d_out, cache: ForwardCache, params: SnParams) -> SnGrads:
    """Gradients of a train-mode forward pass.

    The error reaches the input directly through ``xhat`` and indirectly
    through every scope's mean and variance; LN terms fan out over the
    channels of a sample and BN terms over the samples of a channel.
    """
    d_out = as_tensor4(d_out)
    if not cache.train:
        raise StateError("backward needs a cache from a train-mode forward")
    if d_out.shape != cache.x.shape:
        raise ShapeError(f"d_out {d_out.shape} does not match input {cache.x.shape}")
    n, c, h, w = cache.x.shape
    if (params.channels != c or params.eps != cache.eps
            or not np.array_equal(params.w_mu, cache.w_mu)
            or not np.array_equal(params.w_var, cache.w_var)):
        raise StateError("cache was produced with different parameters")

    x, xhat = cache.x, cache.xhat
    st_in, st_ln, st_bn = cache.stats
    w_mu, w_var = cache.w_mu, cache.w_var

    d_beta = d_out.sum(axis=(0, 2, 3))
    d_gamma = (d_out * xhat).sum(axis=(0, 2, 3))
    d_xhat = d_out * params.gamma.reshape(1, c, 1, 1)

    inv_std = 1.0 / np.sqrt(cache.var_eps)
    # gradients w.r.t. the mixed statistics, one entry per (n, c)
    d_var = -0.5 / cache.var_eps[:, :, 0, 0] * (d_xhat * xhat).sum(axis=(2, 3))
    d_mu = -inv_std[:, :, 0, 0] * d_xhat.sum(axis=(2, 3))

    hw = h * w
    d_var_ln, d_mu_ln = d_var.sum(axis=1), d_mu.sum(axis=1)
    d_var_bn, d_mu_bn = d_var.sum(axis=0), d_mu.sum(axis=0)

    d_input = d_xhat * inv_std
    d_input += (2.0 * w_var[0] / hw) * (x - st_in.mu[:, :, None, None]) * d_var[:, :, None, None]
    d_input += (2.0 * w_var[1] / (c * hw)) * (x - st_ln.mu[:, None, None, None]) \
        * d_var_ln[:, None, None, None]
    d_input += (2.0 * w_var[2] / (n * hw)) * (x - st_bn.mu[None, :, None, None]) \
        * d_var_bn[None, :, None, None]
    d_input += (w_mu[0] / hw) * d_mu[:, :, None, None]
    d_input += (w_mu[1] / (c * hw)) * d_mu_ln[:, None, None, None]
    d_input += (w_mu[2] / (n * hw)) * d_mu_bn[None, :, None, None]

    # gradient w.r.t. each weight, then through the softmax Jacobian
    g_mu = np.array([(d_mu * st_in.mu).sum(), (d_mu_ln * st_ln.mu).sum(),
                     (d_mu_bn * st_bn.mu).sum()])
    g_var = np.array([(d_var * st_in.var).sum(), (d_var_ln * st_ln.var).sum(),
                      (d_var_bn * st_bn.var).sum()])
    d_lambda_mu = w_mu * (g_mu - w_mu @ g_mu)
    d_lambda_var = w_var * (g_var - w_var @ g_var)

    return SnGrads(d_input, d_gamma, d_beta, d_lambda_mu, d_lambda_var)


def sn_sparsify(params: SnParams) -> SnParams:
    """Collapse both triplets onto their argmax normalizer (first index on ties)."""
    out = params.copy()
    for name in ("lambda_mu", "lambda_var"):
        lam = getattr(params, name)
        sat = np.full(3, -SATURATION)
        sat[int(np.argmax(lam))] = 0.0
        setattr(out, name, sat)
    out.sparse = True
    return out


def update_moving_average(state: InferenceState, batch_stats: NormStats) -> InferenceState:
    """``running <- p * running + (1 - p) * batch`` for both mean and variance."""
    if state.mode is not InferenceMode.MOVING_AVERAGE:
        raise StateError("moving-average update on a batch-average state")
    if Scope(batch_stats.scope) is not Scope.BN:
        raise StateError(f"expected BN statistics, got {batch_stats.scope}")
    if batch_stats.mu.shape != state.bn_mu.shape:
        raise StateError(f"statistics for {batch_stats.mu.size} channels, "
                         f"state has {state.bn_mu.size}")
    p = state.momentum
    return replace(state,
                   bn_mu=p * state.bn_mu + (1.0 - p) * batch_stats.mu,
                   bn_var=p * state.bn_var + (1.0 - p) * batch_stats.var)


class SnStack:
    """A plain sequence of SN layers applied one after another.

    The smallest model satisfying the ``batch_bn_stats`` protocol used by
    :func:`calibrate_batch_average`.
    """

    def __init__(self, layers: Sequence[SnParams]):
        self.layers = list(layers)

    def forward(self, x, states: Optional[Sequence[InferenceState]] = None) -> np.ndarray:
        for i, params in enumerate(self.layers):
            if states is None:
                x, _ = sn_forward(x, params)
            else:
                x, _ = sn_forward(x, params, "eval", states[i])
        return x

    def batch_bn_stats(self, x) -> list[NormStats]:
        collected = []
        for params in self.layers:
            x, cache = sn_forward(x, params)
            collected.append(cache.stats[2])
        return collected


def calibrate_batch_average(model, batches: Iterable, sample_batches: int = 50
                            ) -> list[InferenceState]:
    """Batch-average BN statistics for every SN layer of a frozen model.

    ``model.batch_bn_stats(x)`` must run a train-mode forward without
    touching any parameter and return the BN statistics seen by each SN
    layer.  Up to ``sample_batches`` minibatches are drawn from ``batches``
    and the per-layer means and variances are averaged arithmetically.
    """
    if sample_batches < 1:
        raise ParameterError(f"sample_batches must be >= 1, got {sample_batches}")
    sums_mu: list[np.ndarray] = []
    sums_var: list[np.ndarray] = []
    seen = 0
    for batch in itertools.islice(batches, sample_batches):
        layer_stats = model.batch_bn_stats(batch)
        if not sums_mu:
            sums_mu = [np.zeros_like(s.mu) for s in layer_stats]
            sums_var = [np.zeros_like(s.var) for s in layer_stats]
        for k, s in enumerate(layer_stats):
            sums_mu[k] += s.mu
            sums_var[k] += s.var
        seen += 1
    if seen == 0:
        raise DataError("calibration loader yielded no minibatches")
    return [InferenceState(InferenceMode.BATCH_AVERAGE, m / seen, v / seen,
                           sample_batches=seen)
            for m, v in zip(sums_mu, sums_var)]


# Parameter files: <name>.snt holds gamma and beta as a (2, C, 1, 1) SNT1
# tensor; <name>.manifest holds one key=value per line.
_LAMBDA_KEYS = [f"lambda_{stat}_{k.value}" for stat in ("mu", "var") for k in SCOPES]


def save_sn_params(directory: str | os.PathLike, name: str, params: SnParams) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tensor_path = directory / f"{name}.snt"
    write_tensor(tensor_path, np.stack([params.gamma, params.beta]).reshape(2, -1, 1, 1))
    lambdas = list(params.lambda_mu) + list(params.lambda_var)
    lines = [f"layer={name}", f"channels={params.channels}", f"eps={params.eps:.17g}"]
    lines += [f"{key}={value:.17g}" for key, value in zip(_LAMBDA_KEYS, lambdas)]
    lines += [f"sparse={int(params.sparse)}", f"tensor={tensor_path.name}"]
    manifest = directory / f"{name}.manifest"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


def load_sn_params(manifest: str | os.PathLike) -> tuple[str, SnParams]:
    manifest = Path(manifest)
    entries = {}
    for line in manifest.read_text().splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"{manifest}: malformed line {line!r}")
        entries[key.strip()] = value.strip()
    try:
        channels = int(entries["channels"])
        lambdas = [float(entries[k]) for k in _LAMBDA_KEYS]
        eps = float(entries["eps"])
        tensor = read_tensor(manifest.parent / entries["tensor"])
        name = entries["layer"]
    except KeyError as exc:
        raise FormatError(f"{manifest}: missing key {exc.args[0]}") from None
    if tensor.shape != (2, channels, 1, 1):
        raise FormatError(f"{manifest}: tensor shape {tensor.shape} != (2, {channels}, 1, 1)")
    if not all(math.isfinite(v) for v in lambdas):
        raise FormatError(f"{manifest}: non-finite control parameter")
    params = SnParams(tensor[0].reshape(-1), tensor[1].reshape(-1), lambdas[:3], lambdas[3:],
                      eps=eps, sparse=entries.get("sparse", "0") == "1")
    return name, params
