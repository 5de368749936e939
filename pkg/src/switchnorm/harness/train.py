"""Training loop, evaluation and the end-to-end toy experiment."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import ParameterError, TrainingError
from ..snlayer import InferenceState
from ..stats import stats_direct
from ..tensor import Rng
from .data import Dataset, minibatches, synth_dataset
from .net import ToyNet, softmax_cross_entropy
from .optim import SGD

METRICS_HEADER = ("step", "loss", "acc", "layer", "stat", "w_in", "w_ln", "w_bn")


@dataclass
class TrainConfig:
    minibatch_size: int = 32
    steps: int = 1000
    lr: float = 0.05
    momentum: float = 0.9
    weight_decay_main: float = 1e-4
    weight_decay_affine: float = 1e-4
    weight_decay_lambda: float = 0.0
    seed: int = 0
    eval_mode: str = "batch_average"
    sample_batches: int = 50
    ma_momentum: float = 0.9
    # optional single step decay of the learning rate
    lr_decay_at: Optional[int] = None
    lr_decay_factor: float = 0.1

    def __post_init__(self):
        if not self.lr >= 0:
            raise ParameterError(f"lr must be >= 0, got {self.lr}")
        if min(self.weight_decay_main, self.weight_decay_affine, self.weight_decay_lambda) < 0:
            raise ParameterError("weight decays must be >= 0")
        if self.minibatch_size < 1 or self.steps < 0:
            raise ParameterError("minibatch_size must be >= 1 and steps >= 0")
        if self.eval_mode not in ("batch_average", "moving_average"):
            raise ParameterError(f"unknown eval mode {self.eval_mode!r}")


@dataclass
class TaskConfig:
    """Synthetic classification task and network shape."""

    classes: int = 4
    train_samples: int = 512
    test_samples: int = 1024
    channels: int = 3
    height: int = 8
    width: int = 8
    noise: float = 1.0
    net_width: int = 8
    depth: int = 2


@dataclass
class TrainLog:
    steps: list[int] = field(default_factory=list)
    loss: list[float] = field(default_factory=list)
    acc: list[float] = field(default_factory=list)
    # per step: list over layers of (w_mu, w_var)
    weights: list[list[tuple[np.ndarray, np.ndarray]]] = field(default_factory=list)

    def rows(self):
        for step, loss, acc, layers in zip(self.steps, self.loss, self.acc, self.weights):
            for i, (w_mu, w_var) in enumerate(layers):
                yield (step, loss, acc, f"sn{i}", "mu", *w_mu)
                yield (step, loss, acc, f"sn{i}", "var", *w_var)

    def write_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(METRICS_HEADER)
            for step, loss, acc, layer, stat, *ws in self.rows():
                writer.writerow([step, f"{loss:.17g}", f"{acc:.6f}", layer, stat,
                                 *(f"{v:.6f}" for v in ws)])


def train(net: ToyNet, cfg: TrainConfig, data: Dataset, rng: Optional[Rng] = None,
          checkpoint: Optional[Callable[[int, ToyNet], None]] = None,
          checkpoint_every: int = 0) -> tuple[ToyNet, TrainLog]:
    """Joint SGD on filters, affine parameters and SN control parameters.

    Every step uses one minibatch for all parameter groups.  Moving averages of
    the BN statistics are tracked alongside so either inference mode can be
    evaluated afterwards.  ``checkpoint(steps_done, net)`` is called every
    ``checkpoint_every`` steps and must not modify the net.
    """
    rng = rng if rng is not None else Rng(cfg.seed)
    opt = SGD(net.parameters(), lr=cfg.lr, momentum=cfg.momentum,
              weight_decay={"main": cfg.weight_decay_main,
                            "affine": cfg.weight_decay_affine,
                            "lambda": cfg.weight_decay_lambda})
    stream = minibatches(data, cfg.minibatch_size, rng)
    log = TrainLog()
    for step in range(cfg.steps):
        if cfg.lr_decay_at is not None and step == cfg.lr_decay_at:
            opt.lr *= cfg.lr_decay_factor
        batch = next(stream)
        logits = net.forward(batch.x, "train", track_running=True)
        loss, d_logits = softmax_cross_entropy(logits, batch.y)
        if not np.isfinite(loss):
            raise TrainingError("non-finite loss", step)
        if cfg.minibatch_size == 1:
            _check_single_sample_identity(net, step)
        grads = net.backward(d_logits)
        opt.step(grads)
        log.steps.append(step)
        log.loss.append(loss)
        log.acc.append(float((logits.argmax(axis=1) == batch.y).mean()))
        log.weights.append([(p.w_mu, p.w_var) for p in net.sn])
        if checkpoint is not None and checkpoint_every and (step + 1) % checkpoint_every == 0:
            checkpoint(step + 1, net)
    return net, log


def _check_single_sample_identity(net: ToyNet, step: int) -> None:
    # with one sample per batch the BN and IN statistics coincide
    tape, _, _ = net._tape
    for _, cache, _ in tape:
        st_in, _, st_bn = cache.stats
        if (np.abs(st_in.mu[0] - st_bn.mu).max() > 1e-12
                or np.abs(st_in.var[0] - st_bn.var).max() > 1e-12):
            raise TrainingError("BN and IN statistics differ for a single-sample batch", step)


def evaluate(net: ToyNet, data: Dataset, states) -> float:
    return float((net.predict(data.x, states) == data.y).mean())


@dataclass
class ExperimentResult:
    net: ToyNet
    log: TrainLog
    batch_average: list[InferenceState]
    acc_batch_average: float
    acc_moving_average: float
    acc_train: float
    # (steps done, batch-average test accuracy, moving-average test accuracy)
    checkpoints: list[tuple[int, float, float]] = field(default_factory=list)


def make_task(seed: int, task: TaskConfig) -> tuple[Dataset, Dataset]:
    rng = Rng(seed)
    data_rng = rng.spawn()
    total = task.train_samples + task.test_samples
    data = synth_dataset(data_rng, task.classes, total, task.channels, task.height,
                         task.width, task.noise)
    return data.subset(slice(0, task.train_samples)), data.subset(slice(task.train_samples, None))


def run_experiment(cfg: TrainConfig, task: TaskConfig = TaskConfig(),
                   checkpoint_every: int = 0) -> ExperimentResult:
    """Build the task and net from ``cfg.seed``, train, then evaluate on the
    held-out split with batch-average and moving-average BN statistics.

    ``acc_train`` is the batch-average accuracy on the training split.  With
    ``checkpoint_every`` both test accuracies are also recorded during
    training; calibration draws from its own random stream so the training
    trajectory is unaffected.
    """
    rng = Rng(cfg.seed)
    data_seed = int(rng.next_u64(1)[0])
    init_rng, batch_rng, calib_rng = rng.spawn(), rng.spawn(), rng.spawn()
    train_set, test_set = make_task(data_seed, task)
    net = ToyNet(init_rng, task.channels, task.classes, task.net_width, task.depth,
                 momentum=cfg.ma_momentum)
    size = min(cfg.minibatch_size, len(train_set))

    def calibrate():
        return net.calibrate(minibatches(train_set, size, calib_rng), cfg.sample_batches)

    checkpoints = []

    def record(step, _net):
        checkpoints.append((step, evaluate(net, test_set, calibrate()),
                            evaluate(net, test_set, net.running)))

    net, log = train(net, cfg, train_set, batch_rng, record, checkpoint_every)
    states = calibrate()
    return ExperimentResult(net, log, states,
                            evaluate(net, test_set, states),
                            evaluate(net, test_set, net.running),
                            evaluate(net, train_set, states),
                            checkpoints)
