import json
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays, array_shapes

from einstein_tensor import io
from einstein_tensor.core import DenseTensor
from einstein_tensor.errors import ShapeMismatch


class TestJson:
    def test_layout(self):
        t = DenseTensor(np.arange(6.0).reshape(2, 3))
        payload = json.loads(io.to_tns_json(t))
        assert payload == {"dims": [2, 3], "data": [0.0, 3.0, 1.0, 4.0, 2.0, 5.0]}

    def test_missing_fields(self):
        with pytest.raises(ShapeMismatch):
            io.from_tns_json('{"dims": [2]}')
        with pytest.raises(ShapeMismatch):
            io.from_tns_json('{"dims": [2, 2], "data": [1, 2, 3]}')


class TestBinary:
    def test_header(self):
        buf = io.to_tns_bytes(DenseTensor(np.ones((2, 3, 4))))
        assert buf[:4] == b"TNS1"
        assert struct.unpack_from("<I3Q", buf, 4) == (3, 2, 3, 4)
        assert len(buf) == 4 + 4 + 24 + 8 * 24

    def test_bad_magic(self):
        with pytest.raises(ShapeMismatch):
            io.from_tns_bytes(b"XXXX" + bytes(12))


@given(arrays(np.float64, array_shapes(min_dims=1, max_dims=4, max_side=3),
              elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_round_trips_exact(arr):
    t = DenseTensor(arr)
    assert np.array_equal(io.from_tns_json(io.to_tns_json(t)).data, arr)
    assert np.array_equal(io.from_tns_bytes(io.to_tns_bytes(t)).data, arr)


def test_save_load_by_suffix(tmp_path, rng):
    t = DenseTensor(rng.standard_normal((2, 2, 3)))
    for name in ("t.json", "t.tns"):
        path = io.save(t, tmp_path / name)
        assert np.array_equal(io.load(path).data, t.data)
    assert (tmp_path / "t.tns").read_bytes()[:4] == b"TNS1"
    assert (tmp_path / "t.json").read_text().startswith("{")
