"""Central-difference check of the SN backward pass."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from ..snlayer import SATURATION, SnGrads, SnParams, sn_backward, sn_forward
from ..tensor import Rng, tensor_randn

GROUPS = ("input", "gamma", "beta", "lambda_mu", "lambda_var")


@dataclass
class GradcheckResult:
    errors: dict[str, float]      # max relative error per group
    analytic: dict[str, np.ndarray]
    numeric: dict[str, np.ndarray]

    def passed(self, threshold: float = 1e-5) -> bool:
        return all(e < threshold for e in self.errors.values())


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Largest componentwise ``|a - n| / max(|a|, |n|, floor)``.

    The floor keeps components that are zero in both paths from dividing by
    zero; below it the comparison is effectively absolute.
    """
    a, n = np.asarray(analytic).ravel(), np.asarray(numeric).ravel()
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float((np.abs(a - n) / denom).max())


def random_config(rng: Rng, shape, gamma_zero: bool = False, saturate: str | None = None):
    """Seeded input, parameters and upstream gradient for one check.

    Channels get distinct offsets and scales so every statistic path carries
    signal.  ``saturate`` in {"in", "ln", "bn"} pins both triplets one-hot.
    """
    n, c, h, w = shape
    x = tensor_randn(rng, n, c, h, w)
    x = x * (0.5 + rng.uniform(c)).reshape(1, c, 1, 1) + rng.normal(c).reshape(1, c, 1, 1)
    gamma = np.zeros(c) if gamma_zero else 1.0 + 0.5 * rng.normal(c)
    params = SnParams(gamma, rng.normal(c), rng.normal(3), rng.normal(3))
    if saturate is not None:
        k = ("in", "ln", "bn").index(saturate)
        lam = np.full(3, -SATURATION)
        lam[k] = SATURATION
        params.lambda_mu, params.lambda_var = lam.copy(), lam.copy()
    d_out = tensor_randn(rng, n, c, h, w)
    return x, params, d_out


def numeric_grads(x, params: SnParams, d_out, eps_fd: float) -> dict[str, np.ndarray]:
    """Central differences of ``L = sum(d_out * sn_forward(x))`` for every input."""

    def loss(xv, pv):
        y, _ = sn_forward(xv, pv)
        return float((d_out * y).sum())

    out = {}
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + eps_fd
        up = loss(x, params)
        x[idx] = orig - eps_fd
        down = loss(x, params)
        x[idx] = orig
        grad[idx] = (up - down) / (2 * eps_fd)
    out["input"] = grad
    for group in GROUPS[1:]:
        arr = getattr(params, group)
        grad = np.zeros_like(arr)
        for k in range(arr.size):
            orig = arr[k]
            arr[k] = orig + eps_fd
            up = loss(x, params)
            arr[k] = orig - eps_fd
            down = loss(x, params)
            arr[k] = orig
            grad[k] = (up - down) / (2 * eps_fd)
        out[group] = grad
    return out


def analytic_grads(x, params: SnParams, d_out) -> dict[str, np.ndarray]:
    _, cache = sn_forward(x, params)
    g: SnGrads = sn_backward(d_out, cache, params)
    return {"input": g.d_input, "gamma": g.d_gamma, "beta": g.d_beta,
            "lambda_mu": g.d_lambda_mu, "lambda_var": g.d_lambda_var}


def gradcheck(shape=(2, 3, 4, 4), seed: int = 7, eps_fd: float = 1e-5,
              gamma_zero: bool = False, saturate: str | None = None) -> GradcheckResult:
    if not eps_fd > 0:
        raise ParameterError(f"eps_fd must be > 0, got {eps_fd}")
    x, params, d_out = random_config(Rng(seed), tuple(shape), gamma_zero, saturate)
    analytic = analytic_grads(x, params, d_out)
    numeric = numeric_grads(x, params, d_out, eps_fd)
    errors = {g: relative_error(analytic[g], numeric[g]) for g in GROUPS}
    return GradcheckResult(errors, analytic, numeric)
