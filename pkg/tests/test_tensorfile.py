import struct

import numpy as np
import pytest

from semdvc.tensorfile import MAGIC, TensorFormatError, read_tensor, write_tensor


def test_round_trip_3x4(tmp_path):
    path = tmp_path / "m.dvct"
    mat = np.arange(12, dtype=np.float32).reshape(3, 4) / 7.0
    write_tensor(path, mat)
    back = read_tensor(path)
    assert back.shape == (3, 4)
    assert back.dtype == np.float32
    np.testing.assert_array_equal(back, mat)


def test_round_trip_preserves_bit_patterns(tmp_path):
    path = tmp_path / "bits.dvct"
    rng = np.random.default_rng(0)
    mat = rng.normal(size=(17, 5)).astype(np.float32)
    write_tensor(path, mat)
    assert read_tensor(path).tobytes() == mat.tobytes()


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.dvct"
    path.write_bytes(b"XXXX" + struct.pack("<I", 1) + struct.pack("<I", 1) + b"\x00" * 4)
    with pytest.raises(TensorFormatError, match="magic"):
        read_tensor(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "short.dvct"
    # rank=2, dims=[2,2] requires 16 payload bytes; write 12
    path.write_bytes(MAGIC + struct.pack("<III", 2, 2, 2) + b"\x00" * 12)
    with pytest.raises(TensorFormatError, match="12 bytes, expected 16"):
        read_tensor(path)


def test_1d_and_3d_shapes(tmp_path):
    for shape in [(6,), (2, 3, 4)]:
        path = tmp_path / f"r{len(shape)}.dvct"
        arr = np.ones(shape, dtype=np.float32) * 0.5
        write_tensor(path, arr)
        assert read_tensor(path).shape == shape
