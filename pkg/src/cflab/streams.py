"""Digit streams and the ``CFD1`` on-disk format.

A ``CFD1`` file is the 4-byte magic ``b"CFD1"``, a little-endian ``uint64``
digit count, then each digit as an unsigned LEB128 varint.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional

import numpy as np

MAGIC = b"CFD1"
HEADER = struct.Struct("<4sQ")
MAX_VARINT_BYTES = 9          # 63 payload bits, digits are stored as int64


class StreamFormatError(ValueError):
    """Malformed ``CFD1`` data; ``offset`` is the byte offset of the problem."""

    def __init__(self, offset: int, message: str):
        super().__init__(f"byte {offset}: {message}")
        self.offset = offset


class InsufficientDigits(ValueError):
    def __init__(self, required: int, available: int):
        super().__init__(f"stream has {available} digits, {required} required")
        self.required = required
        self.available = available


class DigitStream:
    """Lazily realised sequence of continued-fraction digits.

    Finite streams wrap an array; unbounded ones pull chunks from
    ``producer(n)``.  Realised digits are cached so repeated ``take`` calls
    return the same prefix.
    """

    def __init__(self, source: str, digits=None,
                 producer: Optional[Callable[[int], np.ndarray]] = None,
                 meta: Optional[dict] = None):
        self.source = source
        self._buf = np.asarray(digits if digits is not None else [], dtype=np.int64)
        if self._buf.ndim != 1:
            raise ValueError("digits must be one-dimensional")
        if self._buf.size and self._buf.min() < 1:
            raise ValueError("continued-fraction digits must be >= 1")
        self._producer = producer
        self.meta = dict(meta or {})

    @property
    def finite(self) -> bool:
        return self._producer is None

    def __len__(self) -> int:
        if not self.finite:
            raise TypeError("unbounded stream has no length")
        return int(self._buf.size)

    def available(self) -> Optional[int]:
        return int(self._buf.size) if self.finite else None

    def take(self, n: int) -> np.ndarray:
        """First ``n`` digits as a read-only int64 array."""
        if n < 0:
            raise ValueError("n must be >= 0")
        if n > self._buf.size:
            if self._producer is None:
                raise InsufficientDigits(n, int(self._buf.size))
            more = self._producer(n - self._buf.size)
            self._buf = np.concatenate([self._buf, np.asarray(more, dtype=np.int64)])
        view = self._buf[:n]
        view.flags.writeable = False
        return view

    def __iter__(self) -> Iterator[int]:
        i = 0
        while True:
            if self.finite:
                if i >= self._buf.size:
                    return
                chunk = self._buf[i:i + 4096]
            else:
                chunk = self.take(i + 4096)[i:]
            yield from chunk.tolist()
            i += chunk.size

    def __repr__(self) -> str:
        size = f"{self._buf.size} digits" if self.finite else "unbounded"
        return f"DigitStream(source={self.source!r}, {size})"


def stream_from_digits(digits: Iterable[int], repeat: bool = False) -> DigitStream:
    """Replayable stream over explicit digits; ``repeat=True`` cycles them forever."""
    arr = np.asarray(list(digits), dtype=np.int64)
    if arr.size and arr.min() < 1:
        raise ValueError("continued-fraction digits must be >= 1")
    if not repeat:
        return DigitStream("list", arr)
    if arr.size == 0:
        raise ValueError("cannot repeat an empty digit list")
    state = {"pos": 0}

    def produce(n):
        idx = (state["pos"] + np.arange(n)) % arr.size
        state["pos"] += n
        return arr[idx]

    return DigitStream("list", None, producer=produce, meta={"period": arr.tolist()})


# --------------------------------------------------------------------------
# CFD1 encoding

def encode_digits(digits) -> bytes:
    arr = np.asarray(digits, dtype=np.int64)
    if arr.size and arr.min() < 1:
        raise ValueError("continued-fraction digits must be >= 1")
    vals = arr.astype(np.uint64)
    nbytes = np.ones(arr.size, dtype=np.int64)
    for j in range(1, MAX_VARINT_BYTES):
        nbytes += (vals >> np.uint64(7 * j)) > 0
    starts = np.concatenate([[0], np.cumsum(nbytes)[:-1]]).astype(np.int64)
    out = np.zeros(int(nbytes.sum()), dtype=np.uint8)
    for j in range(MAX_VARINT_BYTES):
        sel = nbytes > j
        if not sel.any():
            break
        byte = (vals[sel] >> np.uint64(7 * j)) & np.uint64(0x7F)
        cont = (nbytes[sel] - 1 > j).astype(np.uint64) << np.uint64(7)
        out[starts[sel] + j] = (byte | cont).astype(np.uint8)
    return HEADER.pack(MAGIC, arr.size) + out.tobytes()


def decode_digits(data: bytes) -> np.ndarray:
    if len(data) < HEADER.size:
        raise StreamFormatError(len(data), f"truncated header ({len(data)} of {HEADER.size} bytes)")
    magic, count = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise StreamFormatError(0, f"bad magic {magic!r}, expected {MAGIC!r}")
    body = np.frombuffer(data, dtype=np.uint8, offset=HEADER.size)
    base = HEADER.size
    ends = np.flatnonzero(body < 0x80)
    if body.size and (ends.size == 0 or ends[-1] != body.size - 1):
        last_start = ends[-1] + 1 if ends.size else 0
        raise StreamFormatError(base + int(last_start), "truncated varint at end of data")
    starts = np.concatenate([[0], ends[:-1] + 1]).astype(np.int64) if ends.size else ends
    lengths = ends - starts + 1
    if ends.size > count:
        raise StreamFormatError(base + int(starts[count]),
                                f"{ends.size} digits present but header declares {count}")
    if ends.size < count:
        raise StreamFormatError(len(data), f"header declares {count} digits but data ends after {ends.size}")
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    bad = np.flatnonzero(lengths > MAX_VARINT_BYTES)
    if bad.size:
        raise StreamFormatError(base + int(starts[bad[0]]), "varint exceeds 63 bits")
    shift = (np.arange(body.size) - np.repeat(starts, lengths)) * 7
    parts = (body & 0x7F).astype(np.uint64) << shift.astype(np.uint64)
    digits = np.add.reduceat(parts, starts).astype(np.int64)
    zero = np.flatnonzero(digits < 1)
    if zero.size:
        raise StreamFormatError(base + int(starts[zero[0]]), "digit 0 is not a continued-fraction digit")
    return digits


def write_stream(path, digits) -> Path:
    path = Path(path)
    path.write_bytes(encode_digits(digits))
    return path


def read_stream(path) -> np.ndarray:
    return decode_digits(Path(path).read_bytes())


def stream_from_file(path) -> DigitStream:
    digits = read_stream(path)
    return DigitStream("file", digits, meta={"path": str(path)})


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_sidecar(path, meta: dict) -> Path:
    side = sidecar_path(path)
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return side
