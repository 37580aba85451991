"""Reader/writer for the IDX tensor format used by the MNIST distribution.

Layout (all header integers big-endian)::

    0x00 0x00 <dtype> <ndim>      magic; dtype 0x08 = unsigned byte
    ndim x uint32                 dimension sizes
    payload                       row-major, big-endian elements

Files may be gzip-compressed; compression is detected from the content,
not the file name.
"""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

_DTYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}
_CODES = {dt.newbyteorder("="): code for code, dt in _DTYPES.items()}


class IdxFormatError(ValueError):
    pass


@dataclass
class Dataset:
    images: np.ndarray  # (n, d) float32 in [0, 1]
    labels: np.ndarray  # (n,) int64
    name: str = ""
    split: str = "test"

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ValueError(f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)

    @property
    def n_features(self):
        return self.images.shape[1]


def _read_bytes(path) -> bytes:
    data = Path(path).read_bytes()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data


def read_idx(path, expect_magic: int | None = None) -> np.ndarray:
    data = _read_bytes(path)
    if len(data) < 4:
        raise IdxFormatError(f"{path}: truncated header")
    (magic,) = struct.unpack(">I", data[:4])
    if expect_magic is not None and magic != expect_magic:
        raise IdxFormatError(f"{path}: magic 0x{magic:08X}, expected 0x{expect_magic:08X}")
    if magic >> 16 != 0:
        raise IdxFormatError(f"{path}: bad magic 0x{magic:08X}")
    code, ndim = (magic >> 8) & 0xFF, magic & 0xFF
    if code not in _DTYPES:
        raise IdxFormatError(f"{path}: unknown element type 0x{code:02X}")
    header = 4 + 4 * ndim
    if len(data) < header:
        raise IdxFormatError(f"{path}: truncated header")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    dtype = _DTYPES[code]
    need = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if len(data) - header < need:
        raise IdxFormatError(f"{path}: truncated payload ({len(data) - header} of {need} bytes)")
    if len(data) - header > need:
        raise IdxFormatError(f"{path}: {len(data) - header - need} trailing bytes")
    arr = np.frombuffer(data, dtype=dtype, count=need // dtype.itemsize, offset=header)
    return arr.reshape(dims).astype(dtype.newbyteorder("="))


def write_idx(path, array, compress: bool | None = None) -> None:
    """Write ``array`` as IDX. Compresses when ``compress`` is true or the
    path ends in ``.gz``."""
    arr = np.asarray(array)
    code = _CODES.get(arr.dtype)
    if code is None:
        raise TypeError(f"dtype {arr.dtype} has no IDX code")
    header = struct.pack(">I", (code << 8) | arr.ndim) + struct.pack(f">{arr.ndim}I", *arr.shape)
    payload = header + arr.astype(_DTYPES[code]).tobytes()
    path = Path(path)
    if compress is None:
        compress = path.suffix == ".gz"
    if compress:
        payload = gzip.compress(payload, mtime=0)
    path.write_bytes(payload)


def load_idx(images_path, labels_path, name: str = "", split: str = "test") -> Dataset:
    """Load an image/label IDX pair; pixels are scaled by 1/255 and flattened."""
    images = read_idx(images_path, IMAGES_MAGIC)
    labels = read_idx(labels_path, LABELS_MAGIC)
    if len(images) != len(labels):
        raise IdxFormatError(f"count mismatch: {len(images)} images, {len(labels)} labels")
    flat = images.reshape(len(images), -1).astype(np.float32) / np.float32(255.0)
    return Dataset(flat, labels.astype(np.int64), name=name or Path(images_path).name, split=split)
