"""Self-describing binary container for numeric arrays.

Layout (little-endian throughout):

    bytes 0-3   magic "LISA"
    byte  4     format version (currently 1)
    byte  5     dtype code: 0=float64, 1=float32, 2=uint16, 3=uint32
    byte  6     number of dimensions
    byte  7     padding (zero)
    then        ndims x uint64 dimension sizes
    then        row-major payload

The format is deliberately trivial so fixtures can be produced and consumed
from any language.
"""

import struct

import numpy as np

MAGIC = b"LISA"
VERSION = 1

_CODE_TO_DTYPE = {
    0: np.dtype("<f8"),
    1: np.dtype("<f4"),
    2: np.dtype("<u2"),
    3: np.dtype("<u4"),
}
_DTYPE_TO_CODE = {dt: code for code, dt in _CODE_TO_DTYPE.items()}


def dumps(array: np.ndarray) -> bytes:
    """Serialize an array to the container format."""
    arr = np.ascontiguousarray(array)
    dt = arr.dtype.newbyteorder("<")
    if dt not in _DTYPE_TO_CODE:
        raise ValueError(
            f"unsupported dtype {arr.dtype}; expected one of "
            f"{sorted(str(d) for d in _DTYPE_TO_CODE)}"
        )
    if arr.ndim > 255:
        raise ValueError("too many dimensions")
    header = MAGIC + struct.pack("<BBBB", VERSION, _DTYPE_TO_CODE[dt], arr.ndim, 0)
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b""
    return header + dims + arr.astype(dt, copy=False).tobytes(order="C")


def loads(data: bytes) -> np.ndarray:
    """Deserialize an array from the container format."""
    if len(data) < 8:
        raise ValueError("truncated tensor record")
    if data[:4] != MAGIC:
        raise ValueError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    version, code, ndims, pad = struct.unpack("<BBBB", data[4:8])
    if version != VERSION:
        raise ValueError(f"unsupported version {version}")
    if code not in _CODE_TO_DTYPE:
        raise ValueError(f"unknown dtype code {code}")
    if pad != 0:
        raise ValueError("nonzero padding byte")
    offset = 8 + 8 * ndims
    if len(data) < offset:
        raise ValueError("truncated dimension block")
    shape = struct.unpack(f"<{ndims}Q", data[8:offset]) if ndims else ()
    dt = _CODE_TO_DTYPE[code]
    expected = int(np.prod(shape, dtype=np.int64)) * dt.itemsize if ndims else dt.itemsize
    payload = data[offset:]
    if len(payload) != expected:
        raise ValueError(f"payload is {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype=dt).reshape(shape).copy()


def write_tensor(path, array: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(array))


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return loads(fh.read())
