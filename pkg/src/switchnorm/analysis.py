"""Numeric checks of the weight-normalization view of IN/LN, and importance
weight reports."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .errors import ParameterError
from .snlayer import SnParams

__all__ = [
    "WeightReport",
    "report_weights",
    "verify_remark1_in",
    "verify_remark1_ln",
    "whiten",
]

CSV_HEADER = ("layer", "stat", "w_in", "w_ln", "w_bn")


def whiten(patches: np.ndarray) -> np.ndarray:
    """Exact empirical whitening of ``(P, D)`` patches.

    Subtracts the sample mean and multiplies by the inverse Cholesky factor of
    the population covariance, so the result has mean 0 and covariance I up to
    rounding.
    """
    centered = patches - patches.mean(axis=0)
    cov = centered.T @ centered / patches.shape[0]
    lower = cholesky(cov, lower=True)
    return solve_triangular(lower, centered.T, lower=True).T


def _whitened_responses(rng, c_out, patch_dim, patches):
    if patches < patch_dim + 1:
        raise ParameterError(
            f"need at least patch_dim + 1 = {patch_dim + 1} patches, got {patches}")
    if c_out < 1 or patch_dim < 1:
        raise ParameterError("c_out and patch_dim must be >= 1")
    x = whiten(rng.normal(patches * patch_dim).reshape(patches, patch_dim))
    filters = rng.normal(c_out * patch_dim).reshape(c_out, patch_dim)
    return x, filters, x @ filters.T  # responses: (patches, c_out)


def verify_remark1_in(rng, c_out: int, patch_dim: int, patches: int,
                      gamma: float, beta: float, filters=None) -> float:
    """Max |IN(w^T x) - (gamma * w^T x / ||w|| + beta)| over whitened patches.

    IN statistics are taken over the patch axis of each output channel.  With
    whitened patches its mean is 0 and its variance is ||w||^2, so the two
    sides agree up to rounding.  ``filters`` replaces the random filter bank.
    """
    x, w, h = _whitened_responses(rng, c_out, patch_dim, patches)
    if filters is not None:
        w = np.asarray(filters, dtype=np.float64).reshape(c_out, patch_dim)
        h = x @ w.T
    mu = h.mean(axis=0)
    var = ((h - mu) ** 2).mean(axis=0)
    normalized = gamma * (h - mu) / np.sqrt(var) + beta
    closed = gamma * h / np.linalg.norm(w, axis=1) + beta
    return float(np.abs(normalized - closed).max())


def verify_remark1_ln(rng, c_out: int, patch_dim: int, patches: int,
                      gamma: float, beta: float, filters=None) -> float:
    """Max discrepancy between LN over (channel, patch) and the filter-norm
    sum form ``gamma * w_i^T x / (||w_i|| + sum_{j != i} ||w_j||) + beta``.

    Only a documentation value: for whitened inputs LN divides by the RMS of
    the filter norms, which matches the sum form only when C = 1.
    """
    x, w, h = _whitened_responses(rng, c_out, patch_dim, patches)
    if filters is not None:
        w = np.asarray(filters, dtype=np.float64).reshape(c_out, patch_dim)
        h = x @ w.T
    mu = h.mean()
    var = ((h - mu) ** 2).mean()
    normalized = gamma * (h - mu) / np.sqrt(var) + beta
    closed = gamma * h / np.linalg.norm(w, axis=1).sum() + beta
    return float(np.abs(normalized - closed).max())


@dataclass
class WeightReport:
    label: str
    # one (name, w_mu triplet, w_var triplet) entry per layer
    layers: list[tuple[str, np.ndarray, np.ndarray]] = field(default_factory=list)

    @property
    def mean_mu(self) -> np.ndarray:
        return np.mean([m for _, m, _ in self.layers], axis=0)

    @property
    def mean_var(self) -> np.ndarray:
        return np.mean([v for _, _, v in self.layers], axis=0)

    def rows(self):
        for name, w_mu, w_var in self.layers:
            yield (name, "mu", *w_mu)
            yield (name, "var", *w_var)

    def to_csv(self, path: str | os.PathLike | None = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for name, stat, *ws in self.rows():
            writer.writerow([name, stat, *(f"{v:.6f}" for v in ws)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def report_weights(layers: Sequence[SnParams], label: str = "",
                   names: Sequence[str] | None = None) -> WeightReport:
    if not layers:
        raise ParameterError("need at least one layer")
    names = list(names) if names is not None else [f"sn{i}" for i in range(len(layers))]
    return WeightReport(label, [(nm, p.w_mu, p.w_var) for nm, p in zip(names, layers)])
