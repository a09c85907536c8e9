from collections import OrderedDict

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from acoustext.checkpoint import Checkpoint, file_sha256, load_features, save_features, vector
from acoustext.errors import DataError


def sample():
    rng = np.random.default_rng(0)
    return Checkpoint("acoustic", OrderedDict(
        w=rng.normal(size=(3, 4)).astype(np.float32), b=np.arange(4, dtype=np.float32)),
        {"languages": ["en-US", "es-US"], "hidden": [4]})


def test_header_layout():
    data = sample().to_bytes()
    assert data[:4] == b"LIDW"
    assert data[4:6] == b"\x01\x00"
    assert data[6:8] == b"\x08\x00" and data[8:16] == b"acoustic"


def test_round_trip_is_byte_identical(tmp_path):
    ck = sample()
    sha = ck.save(tmp_path / "a.lidw")
    back = Checkpoint.load(tmp_path / "a.lidw", kind="acoustic")
    assert back.meta == ck.meta and list(back.tensors) == ["w", "b"]
    np.testing.assert_array_equal(back.tensors["w"], ck.tensors["w"])
    np.testing.assert_array_equal(vector(back.tensors["b"]), ck.tensors["b"])
    assert back.save(tmp_path / "b.lidw") == sha == file_sha256(tmp_path / "a.lidw")


def test_wrong_kind_rejected(tmp_path):
    sample().save(tmp_path / "a.lidw")
    with pytest.raises(DataError, match="expected a 'text'"):
        Checkpoint.load(tmp_path / "a.lidw", kind="text")


@pytest.mark.parametrize("mutate, msg", [
    (lambda d: b"XXXX" + d[4:], "magic"),
    (lambda d: d[:4] + b"\x02\x00" + d[6:], "version"),
    (lambda d: d[:-3], "truncated"),
    (lambda d: d + b"\x00", "trailing"),
])
def test_corrupt_containers(mutate, msg):
    with pytest.raises(DataError, match=msg):
        Checkpoint.from_bytes(mutate(sample().to_bytes()))


def test_three_dimensional_tensor_rejected():
    with pytest.raises(DataError):
        Checkpoint("x", OrderedDict(t=np.zeros((1, 2, 3)))).to_bytes()


def test_features_helpers(tmp_path):
    f = np.random.default_rng(1).normal(size=(7, 64)).astype(np.float32)
    save_features(tmp_path / "f.lidw", f, {"id": "u1"})
    np.testing.assert_array_equal(load_features(tmp_path / "f.lidw"), f)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(0, 5), st.integers(0, 5)),
              elements=st.floats(-1e6, 1e6, width=32)),
       st.dictionaries(st.text(max_size=5), st.integers(), max_size=3))
def test_round_trip_property(arr, meta):
    ck = Checkpoint("fusion", OrderedDict(t=arr), meta)
    data = ck.to_bytes()
    back = Checkpoint.from_bytes(data)
    assert back.to_bytes() == data
    np.testing.assert_array_equal(back.tensors["t"], arr)
