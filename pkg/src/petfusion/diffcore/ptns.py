"""PTNS v1 tensor file format.

Layout: magic bytes ``PTNS``, u8 version=1, u8 dtype code (1 = little-endian
float32), u8 ndim, ndim x u32 little-endian extents, then the row-major
payload. Every persisted array in the pipeline (images, sinograms,
checkpoint entries) uses this encoding.
"""

from __future__ import annotations

import io
import struct

import numpy as np

from ..errors import FormatError

MAGIC = b"PTNS"
VERSION = 1
DTYPE_F32 = 1


def encode(array: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(array, dtype="<f4")
    if arr.ndim > 255:
        raise FormatError(f"PTNS supports up to 255 dims, got {arr.ndim}")
    head = struct.pack("<4sBBB", MAGIC, VERSION, DTYPE_F32, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape) if arr.ndim else b""
    return head + dims + arr.tobytes()


def decode(blob: bytes) -> np.ndarray:
    if len(blob) < 7:
        raise FormatError("PTNS blob truncated before header")
    magic, version, dtype, ndim = struct.unpack_from("<4sBBB", blob, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported PTNS version {version}")
    if dtype != DTYPE_F32:
        raise FormatError(f"unsupported dtype code {dtype}")
    off = 7
    if len(blob) < off + 4 * ndim:
        raise FormatError("PTNS blob truncated in extent table")
    shape = struct.unpack_from(f"<{ndim}I", blob, off) if ndim else ()
    off += 4 * ndim
    count = int(np.prod(shape)) if ndim else 1
    payload = blob[off:]
    if len(payload) != 4 * count:
        raise FormatError(f"payload holds {len(payload)//4} values, extents say {count}")
    return np.frombuffer(payload, dtype="<f4", count=count).reshape(shape).copy()


def write(path, array: np.ndarray):
    with open(path, "wb") as fh:
        fh.write(encode(array))


def read(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode(fh.read())


def write_stream(fh: io.BufferedWriter, array: np.ndarray) -> int:
    blob = encode(array)
    fh.write(blob)
    return len(blob)
