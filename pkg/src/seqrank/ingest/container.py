"""RKMT: a ragged little-endian container for embedding-sequence sets.

Layout (see docs/FORMAT.md)::

    magic       4 bytes  b"RKMT"
    version     u32      1
    n_sequences u64
    dim         u64
    dtype_code  u8       0 = float32, 1 = float64
    then n_sequences records of
    length      u64
    values      length * dim values, row-major
"""

from __future__ import annotations

import io
import os
import struct
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np

from ..errors import ContainerError
from ..temporal import EmbeddingSequenceSet, as_sequence_set

MAGIC = b"RKMT"
VERSION = 1
HEADER = struct.Struct("<4sIQQB")
LENGTH = struct.Struct("<Q")
DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}

PathOrFile = Union[str, os.PathLike, BinaryIO]


def _dtype_for(code: int) -> np.dtype:
    try:
        return DTYPES[code]
    except KeyError:
        raise ValueError(f"unknown dtype code {code!r}; expected 0 (float32) or 1 (float64)")


def encode_container(seqs, dtype: int = 0) -> bytes:
    seqs = as_sequence_set(seqs)
    np_dtype = _dtype_for(dtype)
    buf = io.BytesIO()
    buf.write(HEADER.pack(MAGIC, VERSION, len(seqs), seqs.dim, dtype))
    for s in seqs.sequences:
        with np.errstate(over="ignore"):
            values = np.ascontiguousarray(s, dtype=np_dtype)
        if not np.all(np.isfinite(values)):
            raise ContainerError("value overflows the requested dtype", buf.tell())
        buf.write(LENGTH.pack(s.shape[0]))
        buf.write(values.tobytes())
    return buf.getvalue()


def write_container(seqs, destination: PathOrFile, dtype: int = 0) -> int:
    """Serialize ``seqs`` and return the number of bytes written."""
    data = encode_container(seqs, dtype)
    if hasattr(destination, "write"):
        destination.write(data)
    else:
        Path(destination).write_bytes(data)
    return len(data)


class _Reader:
    def __init__(self, fh: BinaryIO):
        self.fh = fh
        self.offset = 0
        self.end = None
        try:
            here = fh.tell()
            self.end = fh.seek(0, io.SEEK_END) - here
            fh.seek(here)
        except (AttributeError, OSError, io.UnsupportedOperation):
            pass

    def take(self, size: int, what: str) -> bytes:
        # refuse absurd lengths before allocating a read buffer for them
        if self.end is not None and size > self.end - self.offset:
            available = max(self.end - self.offset, 0)
            data = b""
        else:
            data = self.fh.read(size)
            available = len(data)
        if available != size:
            raise ContainerError(
                f"truncated {what} at offset {self.offset}: "
                f"expected {size} bytes, {available} available",
                self.offset,
            )
        self.offset += size
        return data


def _read(fh: BinaryIO) -> EmbeddingSequenceSet:
    r = _Reader(fh)
    head = fh.read(HEADER.size)
    if not MAGIC.startswith(head[:4]) or (len(head) >= 4 and head[:4] != MAGIC):
        raise ContainerError("bad magic at offset 0", 0)
    if len(head) < HEADER.size:
        raise ContainerError(
            f"truncated header at offset 0: expected {HEADER.size} bytes, "
            f"{len(head)} available",
            0,
        )
    r.offset = HEADER.size
    _, version, n, dim, code = HEADER.unpack(head)
    if version != VERSION:
        raise ContainerError(f"unsupported version {version} at offset 4", 4)
    if n < 1:
        raise ContainerError("n_sequences must be at least 1 (offset 8)", 8)
    if dim < 1:
        raise ContainerError("dim must be at least 1 (offset 16)", 16)
    if code not in DTYPES:
        raise ContainerError(f"unknown dtype code {code} at offset 24", 24)
    np_dtype = DTYPES[code]

    sequences = []
    for i in range(n):
        start = r.offset
        (length,) = LENGTH.unpack(r.take(LENGTH.size, f"length of record {i}"))
        if length < 1:
            raise ContainerError(f"record {i} has zero length at offset {start}", start)
        values_at = r.offset
        raw = r.take(length * dim * np_dtype.itemsize, f"values of record {i}")
        frames = np.frombuffer(raw, dtype=np_dtype).reshape(length, dim)
        bad = ~np.isfinite(frames)
        if bad.any():
            t, c = (int(k) for k in np.argwhere(bad)[0])
            at = values_at + (t * dim + c) * np_dtype.itemsize
            raise ContainerError(
                f"non-finite value in record {i} (frame {t}, column {c}) at offset {at}",
                at,
            )
        sequences.append(frames)
    if fh.read(1):
        raise ContainerError(f"trailing data at offset {r.offset}", r.offset)
    return EmbeddingSequenceSet(tuple(sequences))


def read_container(source: PathOrFile) -> EmbeddingSequenceSet:
    """Parse an RKMT container, validating every field.

    Arrays come back in the stored dtype and are read-only.
    """
    if hasattr(source, "read"):
        return _read(source)
    with open(source, "rb") as fh:
        return _read(fh)


def decode_container(data: bytes) -> EmbeddingSequenceSet:
    return _read(io.BytesIO(data))
