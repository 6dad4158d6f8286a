"""VSNT tensor container: checkpoints, feature files, embedding dumps.

Layout: magic b"VSNT", version u16 LE, entry count u32, then one header per
entry (name length u16 + UTF-8 name, rank u8, shape as u32s, dtype u8 with
0=f32 / 1=f64), then the raw little-endian data blobs concatenated in entry
order.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import ContainerFormatError, ContainerShapeError, ContainerTruncatedError

MAGIC = b"VSNT"
VERSION = 1

_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def _dtype_code(dt: np.dtype) -> int:
    dt = np.dtype(dt)
    if dt == np.float32:
        return 0
    if dt == np.float64:
        return 1
    raise ContainerFormatError(f"unsupported dtype {dt}")


def write_tensors(path, entries: dict) -> None:
    """Write named arrays to a container. Order of the dict is preserved."""
    headers = bytearray()
    blobs = []
    for name, arr in entries.items():
        arr = np.asarray(arr)
        nb = name.encode("utf-8")
        headers += struct.pack("<H", len(nb)) + nb
        headers += struct.pack("<B", arr.ndim)
        headers += struct.pack(f"<{arr.ndim}I", *arr.shape)
        code = _dtype_code(arr.dtype)
        headers += struct.pack("<B", code)
        blobs.append(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", VERSION, len(entries)))
        fh.write(bytes(headers))
        for blob in blobs:
            fh.write(blob)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ContainerTruncatedError(
                f"container ends at byte {len(self.buf)}, needed {self.pos + n}"
            )
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_tensors(path) -> dict:
    """Read a container back into an ordered name -> ndarray dict."""
    buf = Path(path).read_bytes()
    r = _Reader(buf)
    if r.take(4) != MAGIC:
        raise ContainerFormatError(f"bad magic in {path}")
    version, count = r.unpack("<HI")
    if version != VERSION:
        raise ContainerFormatError(f"unsupported container version {version}")
    headers = []
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode("utf-8")
        (rank,) = r.unpack("<B")
        shape = r.unpack(f"<{rank}I") if rank else ()
        (code,) = r.unpack("<B")
        if code not in _DTYPES:
            raise ContainerFormatError(f"unknown dtype code {code} for entry {name!r}")
        headers.append((name, shape, _DTYPES[code]))
    out = {}
    for name, shape, dt in headers:
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        blob = r.take(n * dt.itemsize)
        out[name] = np.frombuffer(blob, dtype=dt).reshape(shape).copy()
    return out


def read_single(path, name: str, rank: int) -> np.ndarray:
    """Read a container holding exactly one entry with the given name/rank."""
    entries = read_tensors(path)
    if list(entries) != [name]:
        raise ContainerFormatError(f"{path}: expected a single {name!r} entry, got {list(entries)}")
    arr = entries[name]
    if arr.ndim != rank:
        raise ContainerShapeError(f"{path}: entry {name!r} has rank {arr.ndim}, expected {rank}")
    return arr
