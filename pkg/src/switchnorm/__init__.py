"""Switchable Normalization in NumPy with hand-written backward passes."""

from .errors import (ConfigurationError, DataError, FormatError, ParameterError, ShapeError,
                     StateError, SwitchNormError, TrainingError)
from .normalizers import AffineParams, normalize_forward
from .snlayer import (ForwardCache, InferenceMode, InferenceState, SnGrads, SnParams, SnStack,
                      calibrate_batch_average, load_sn_params, save_sn_params, sn_backward,
                      sn_forward, sn_sparsify, sn_weights, update_moving_average)
from .stats import NormStats, Scope, stats_direct, stats_reuse
from .tensor import Rng, read_tensor, tensor_new, tensor_randn, write_tensor

__version__ = "0.1.0"
