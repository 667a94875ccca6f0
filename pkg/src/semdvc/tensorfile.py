"""Binary tensor file I/O.

Format: magic b"DVCT", uint32 rank, rank * uint32 dims, then row-major
float32 little-endian payload. Payload length must equal prod(dims) * 4.
"""

import struct
from pathlib import Path

import numpy as np

MAGIC = b"DVCT"


class TensorFormatError(ValueError):
    """Raised when a tensor file is malformed."""


def write_tensor(path, array) -> None:
    """Write a float32 array to `path`. Values are cast to float32."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    path = Path(path)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        f.write(arr.tobytes())


def read_tensor(path) -> np.ndarray:
    """Read an array written by write_tensor. Exact bit-pattern round trip."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 8 or data[:4] != MAGIC:
        raise TensorFormatError(f"{path}: bad magic, expected {MAGIC!r}")
    (rank,) = struct.unpack_from("<I", data, 4)
    header_end = 8 + 4 * rank
    if len(data) < header_end:
        raise TensorFormatError(f"{path}: truncated header (rank={rank})")
    dims = struct.unpack_from(f"<{rank}I", data, 8)
    expected = int(np.prod(dims, dtype=np.int64)) * 4
    payload = data[header_end:]
    if len(payload) != expected:
        raise TensorFormatError(
            f"{path}: payload is {len(payload)} bytes, expected {expected} "
            f"for dims {list(dims)}"
        )
    arr = np.frombuffer(payload, dtype="<f4")
    return arr.reshape(dims).copy()
