"""Binary array container used by the ROI and flow caches.

Layout (little-endian)::

    magic    6 bytes   b"MNARR\\0"
    version  u8        FORMAT_VERSION
    dlen     u8        length of the dtype string
    dtype    dlen      numpy dtype string, e.g. "|u1" or "<f2"
    ndim     u8
    shape    ndim x u64
    payload  row-major array bytes
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from . import FORMAT_VERSION
from .errors import CacheMissError, FormatError

MAGIC = b"MNARR\0"


def encode_array(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr, order="C")
    dt = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
    arr = arr.astype(dt, copy=False)
    dstr = dt.str.encode("ascii")
    head = MAGIC + struct.pack("<BB", FORMAT_VERSION, len(dstr)) + dstr
    head += struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return head + arr.tobytes(order="C")


def decode_array(buf: bytes) -> np.ndarray:
    if buf[:6] != MAGIC:
        raise FormatError("not an array container (bad magic)")
    version, dlen = struct.unpack_from("<BB", buf, 6)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported container version {version}")
    off = 8
    dtype = np.dtype(buf[off : off + dlen].decode("ascii"))
    off += dlen
    (ndim,) = struct.unpack_from("<B", buf, off)
    off += 1
    shape = struct.unpack_from(f"<{ndim}Q", buf, off)
    off += 8 * ndim
    count = int(np.prod(shape)) if ndim else 1
    if len(buf) - off != count * dtype.itemsize:
        raise FormatError("array container payload has the wrong length")
    return np.frombuffer(buf, dtype=dtype, count=count, offset=off).reshape(shape).copy()


def write_array(path, arr: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_array(arr))
    return path


def read_array(path) -> np.ndarray:
    path = Path(path)
    try:
        return decode_array(path.read_bytes())
    except FileNotFoundError:
        raise CacheMissError(f"cache entry missing: {path}") from None


def patch_path(cache_dir, vehicle_id: int, scale: int, frame: int) -> Path:
    return Path(cache_dir) / str(vehicle_id) / str(scale) / f"{frame:06d}.npk"


def flow_path(cache_dir, vehicle_id: int, scale: int, frame: int) -> Path:
    """Flow from ``frame`` to ``frame + 1``."""
    return Path(cache_dir) / str(vehicle_id) / str(scale) / "flow" / f"{frame:06d}.bin"
