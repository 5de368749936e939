"""Train identical toy nets at several minibatch sizes and compare the learned
importance weights."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..errors import ParameterError
from .train import TaskConfig, TrainConfig, run_experiment


@dataclass
class SweepRun:
    size: int
    seed: int
    w_mu: list[np.ndarray]    # per layer
    w_var: list[np.ndarray]
    simplex_error: float      # worst |sum - 1| or bound violation seen during training

    @property
    def w_bn(self) -> float:
        """BN weight averaged over layers and over the mean and variance triplets."""
        return float(np.mean([w[2] for w in self.w_mu + self.w_var]))

    @property
    def w_ln(self) -> float:
        return float(np.mean([w[1] for w in self.w_mu + self.w_var]))


@dataclass
class SweepReport:
    sizes: list[int]
    seeds: list[int]
    runs: list[SweepRun] = field(default_factory=list)

    def run(self, size: int, seed: int) -> SweepRun:
        return next(r for r in self.runs if r.size == size and r.seed == seed)

    @property
    def small(self) -> int:
        return min(self.sizes)

    @property
    def large(self) -> int:
        return max(self.sizes)

    def mean_w_bn(self, size: int) -> float:
        return float(np.mean([r.w_bn for r in self.runs if r.size == size]))

    def bn_wins(self) -> int:
        """Seeds whose w_bn is strictly larger at the largest size."""
        return sum(self.run(self.large, s).w_bn > self.run(self.small, s).w_bn for s in self.seeds)

    def ln_wins(self) -> int:
        """Seeds whose w_ln is strictly larger at the smallest size."""
        return sum(self.run(self.small, s).w_ln > self.run(self.large, s).w_ln for s in self.seeds)

    @property
    def direction(self) -> bool:
        return (self.mean_w_bn(self.large) > self.mean_w_bn(self.small)
                and 2 * self.bn_wins() > len(self.seeds))

    def summary(self) -> str:
        return (f"w_bn_large={self.mean_w_bn(self.large):.6f} "
                f"w_bn_small={self.mean_w_bn(self.small):.6f} "
                f"direction={'pass' if self.direction else 'fail'}")

    def write_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("size", "seed", "layer", "stat", "w_in", "w_ln", "w_bn"))
            for r in self.runs:
                for i, (wm, wv) in enumerate(zip(r.w_mu, r.w_var)):
                    writer.writerow([r.size, r.seed, f"sn{i}", "mu", *(f"{v:.6f}" for v in wm)])
                    writer.writerow([r.size, r.seed, f"sn{i}", "var", *(f"{v:.6f}" for v in wv)])


def _simplex_error(log) -> float:
    worst = 0.0
    for layers in log.weights:
        for triplet in (t for pair in layers for t in pair):
            worst = max(worst, abs(triplet.sum() - 1.0), -triplet.min(), triplet.max() - 1.0)
    return worst


def batch_size_sweep(template: TrainConfig, sizes: Sequence[int], seeds: Sequence[int],
                     task: TaskConfig = TaskConfig()) -> SweepReport:
    """Train one net per (size, seed); nets sharing a seed share data and init."""
    if len(sizes) < 2 or len(seeds) < 3:
        raise ParameterError("need at least 2 sizes and 3 seeds")
    report = SweepReport(list(sizes), list(seeds))
    for seed in seeds:
        for size in sizes:
            cfg = replace(template, minibatch_size=size, seed=seed)
            result = run_experiment(cfg, task)
            report.runs.append(SweepRun(size, seed,
                                        [p.w_mu for p in result.net.sn],
                                        [p.w_var for p in result.net.sn],
                                        _simplex_error(result.log)))
    return report
