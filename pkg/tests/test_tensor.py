import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import splitmix64
from switchnorm import FormatError, ParameterError, Rng, ShapeError
from switchnorm.tensor import (as_tensor4, flat_offset, read_tensor, tensor_new, tensor_randn,
                               write_tensor)


def test_new_fill():
    t = tensor_new(1, 1, 2, 2, 0.0)
    assert t.shape == (1, 1, 2, 2) and np.all(t == 0.0)
    t = tensor_new(2, 3, 4, 5, 1.0)
    assert t.size == 120 and np.all(t == 1.0)
    t = tensor_new(1, 1, 1, 1, 7.5)
    assert t.ravel().tolist() == [7.5]
    assert t.dtype == np.float64


@pytest.mark.parametrize("dims", [(0, 1, 1, 1), (1, 0, 2, 2), (2, 2, 2, 0)])
def test_new_rejects_zero_dim(dims):
    with pytest.raises(ShapeError):
        tensor_new(*dims)


def test_as_tensor4_rejects_rank():
    with pytest.raises(ShapeError):
        as_tensor4(np.zeros((2, 3)))


def test_splitmix_reference_vector():
    # canonical first output of SplitMix64 seeded with 0
    assert int(Rng(0).next_u64(1)[0]) == 0xE220A8397B1DCDAF
    for seed in (0, 1, 42, 2**63 + 5):
        assert Rng(seed).next_u64(7).tolist() == splitmix64(seed, 7)


def test_rng_blocks_concatenate():
    a = Rng(9)
    blocks = np.concatenate([a.next_u64(3), a.next_u64(5)])
    assert blocks.tolist() == Rng(9).next_u64(8).tolist()


def test_uniform_range():
    u = Rng(3).uniform(10000)
    assert u.min() >= 0.0 and u.max() < 1.0


def test_randn_zero_std():
    t = tensor_randn(Rng(5), 2, 2, 3, 3, mean=1.25, std=0.0)
    assert np.all(t == 1.25)


def test_randn_deterministic():
    a = tensor_randn(Rng(42), 2, 3, 4, 5)
    b = tensor_randn(Rng(42), 2, 3, 4, 5)
    assert a.tobytes() == b.tobytes()


def test_randn_sample_mean():
    t = tensor_randn(Rng(1), 4, 8, 6, 6, 0.0, 1.0)
    assert abs(t.mean()) < 4 / math.sqrt(4 * 8 * 36)
    assert abs(t.std() - 1.0) < 0.1


def test_randn_negative_std():
    with pytest.raises(ParameterError):
        tensor_randn(Rng(0), 1, 1, 1, 1, std=-1.0)


@pytest.mark.parametrize("shape", [(1, 1, 1, 1), (2, 3, 4, 5), (3, 1, 2, 2)])
def test_indexing_law(shape):
    x = np.arange(np.prod(shape), dtype=np.float64).reshape(shape)
    flat = x.ravel()
    for n, c, i, j in itertools.product(*(range(d) for d in shape)):
        assert flat[flat_offset(shape, n, c, i, j)] == x[n, c, i, j]


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(*[st.integers(1, 4)] * 4),
              elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_snt1_round_trip(tmp_path_factory, x):
    path = tmp_path_factory.mktemp("snt") / "t.snt"
    write_tensor(path, x)
    y = read_tensor(path)
    assert y.shape == x.shape and y.tobytes() == x.tobytes()


def test_snt1_layout(tmp_path):
    x = np.array([1.0, -2.5]).reshape(1, 1, 1, 2)
    path = tmp_path / "t.snt"
    write_tensor(path, x)
    blob = path.read_bytes()
    assert blob[:4] == b"SNT1"
    assert blob[4:20] == (1).to_bytes(4, "little") * 3 + (2).to_bytes(4, "little")
    assert blob[20] == 0x08
    assert blob[21:] == np.array([1.0, -2.5], dtype="<f8").tobytes()


@pytest.mark.parametrize("corrupt", [
    lambda b: b"XXXX" + b[4:],
    lambda b: b[:20] + b"\x04" + b[21:],
    lambda b: b[:-1],
    lambda b: b[:10],
])
def test_snt1_rejects_corruption(tmp_path, corrupt):
    path = tmp_path / "t.snt"
    write_tensor(path, np.ones((1, 2, 1, 1)))
    path.write_bytes(corrupt(path.read_bytes()))
    with pytest.raises(FormatError):
        read_tensor(path)
