"""Desk-scale training harness: synthetic data, a toy conv net, SGD, the
batch-size sweep and the gradient checker."""

from .data import Dataset, minibatches, synth_dataset
from .gradcheck import GradcheckResult, gradcheck
from .net import ToyNet
from .optim import SGD
from .sweep import SweepReport, batch_size_sweep
from .train import (ExperimentResult, TaskConfig, TrainConfig, TrainLog, evaluate, run_experiment,
                    train)
