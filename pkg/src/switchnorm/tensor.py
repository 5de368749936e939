"""Dense (N, C, H, W) float64 tensors, a portable PRNG and the SNT1 file format.

Tensors are plain ``numpy.ndarray`` objects with ``ndim == 4`` and dtype
``float64``; :func:`as_tensor4` is the single place their contract is checked.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import FormatError, ParameterError, ShapeError

__all__ = [
    "Rng",
    "as_tensor4",
    "flat_offset",
    "read_tensor",
    "tensor_new",
    "tensor_randn",
    "write_tensor",
]

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


class Rng:
    """SplitMix64 generator.

    The i-th output is ``mix(seed + (i + 1) * 0x9E3779B97F4A7C15)`` where
    ``mix`` is the SplitMix64 finalizer (shift-xor 30, mul, shift-xor 27,
    mul, shift-xor 31).  Because each output depends only on its counter the
    stream is produced in vectorised blocks, and identical seeds yield
    identical streams on every platform.

    Uniform doubles take the top 53 bits; Gaussians use Box-Muller on
    consecutive uniform pairs.
    """

    def __init__(self, seed: int):
        self.state = int(seed) & 0xFFFFFFFFFFFFFFFF

    def next_u64(self, count: int) -> np.ndarray:
        if count < 0:
            raise ParameterError(f"count must be >= 0, got {count}")
        base = np.uint64(self.state)
        steps = np.arange(1, count + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = base + steps * _GOLDEN
            z = (z ^ (z >> np.uint64(30))) * _MIX1
            z = (z ^ (z >> np.uint64(27))) * _MIX2
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + count * 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
        return z & _MASK64

    def uniform(self, count: int) -> np.ndarray:
        """Doubles in [0, 1)."""
        return (self.next_u64(count) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, count: int) -> np.ndarray:
        pairs = (count + 1) // 2
        u = self.uniform(2 * pairs)
        u1 = 1.0 - u[0::2]  # (0, 1], keeps log finite
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(2.0 * np.pi * u2)
        z[1::2] = r * np.sin(2.0 * np.pi * u2)
        return z[:count]

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.uniform(n), kind="stable")

    def spawn(self) -> "Rng":
        """Independent child stream seeded from this one."""
        return Rng(int(self.next_u64(1)[0]))


def _check_dims(dims) -> tuple[int, int, int, int]:
    if len(dims) != 4:
        raise ShapeError(f"expected 4 dimensions, got {len(dims)}")
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise ShapeError(f"all dimensions must be >= 1, got {dims}")
    return dims


def as_tensor4(x) -> np.ndarray:
    """Return ``x`` as a float64 (N, C, H, W) array, raising ShapeError otherwise."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 4:
        raise ShapeError(f"expected a rank-4 (N, C, H, W) tensor, got shape {arr.shape}")
    _check_dims(arr.shape)
    return arr


def tensor_new(n: int, c: int, h: int, w: int, fill: float = 0.0) -> np.ndarray:
    return np.full(_check_dims((n, c, h, w)), float(fill), dtype=np.float64)


def tensor_randn(rng: Rng, n: int, c: int, h: int, w: int,
                 mean: float = 0.0, std: float = 1.0) -> np.ndarray:
    """Gaussian tensor drawn from ``rng`` in row-major order."""
    dims = _check_dims((n, c, h, w))
    if not std >= 0.0:
        raise ParameterError(f"std must be >= 0, got {std}")
    z = rng.normal(n * c * h * w)
    return (mean + std * z).reshape(dims)


def flat_offset(shape, n: int, c: int, i: int, j: int) -> int:
    _, C, H, W = shape
    return ((n * C + c) * H + i) * W + j


# SNT1: magic, four u32 LE dims, one dtype byte, LE float64 payload.
_MAGIC = b"SNT1"
_DTYPE_F64 = 0x08
_HEADER = struct.Struct("<4s4IB")


def write_tensor(path: str | os.PathLike, x) -> None:
    arr = as_tensor4(x)
    header = _HEADER.pack(_MAGIC, *arr.shape, _DTYPE_F64)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_tensor(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, n, c, h, w, dtype = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if dtype != _DTYPE_F64:
        raise FormatError(f"{path}: unsupported dtype code {dtype:#04x}")
    dims = _check_dims((n, c, h, w))
    payload = blob[_HEADER.size:]
    expected = 8 * n * c * h * w
    if len(payload) != expected:
        raise FormatError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims)
