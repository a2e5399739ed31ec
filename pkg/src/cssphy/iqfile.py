"""IQ sample files: complex float32 interleaved, with a 32-byte header.

Header layout (little-endian, 32 bytes total):

    offset  size  field
    0       4     magic  b"CSS1"
    4       2     version (currently 1)
    6       2     format tag (1 = complex float32 interleaved)
    8       8     sample rate in Hz (float64)
    16      8     sample count (uint64)
    24      8     reserved, zero

A headerless raw mode supports third-party captures: pass ``raw_rate`` to
read a bare cf32 file.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import IqFormatError
from .modulate import IqBuffer

MAGIC = b"CSS1"
VERSION = 1
FORMAT_CF32 = 1
_HEADER = struct.Struct("<4sHHdQ8s")
HEADER_SIZE = _HEADER.size  # 32


def write_iq(path, buf: IqBuffer) -> None:
    """Write samples as complex float32 with the self-describing header."""
    samples = np.asarray(buf.samples)
    body = np.empty(2 * len(samples), dtype="<f4")
    body[0::2] = samples.real
    body[1::2] = samples.imag
    header = _HEADER.pack(MAGIC, VERSION, FORMAT_CF32, float(buf.rate), len(samples), b"\0" * 8)
    Path(path).write_bytes(header + body.tobytes())


def read_iq(path, raw_rate: float | None = None) -> IqBuffer:
    """Read an IQ file; with ``raw_rate`` the file is headerless cf32."""
    data = Path(path).read_bytes()
    if raw_rate is not None:
        if len(data) % 8:
            raise IqFormatError(f"raw cf32 body length {len(data)} is not a multiple of 8")
        return IqBuffer(_decode_body(data), float(raw_rate))
    if len(data) < HEADER_SIZE:
        raise IqFormatError("file too short for IQ header")
    magic, version, fmt, rate, count, _ = _HEADER.unpack(data[:HEADER_SIZE])
    if magic != MAGIC:
        raise IqFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise IqFormatError(f"unsupported version {version}")
    if fmt != FORMAT_CF32:
        raise IqFormatError(f"unsupported format tag {fmt}")
    body = data[HEADER_SIZE:]
    if len(body) != 8 * count:
        raise IqFormatError(
            f"sample_count {count} disagrees with body length {len(body)} bytes"
        )
    return IqBuffer(_decode_body(body), rate)


def _decode_body(body: bytes) -> np.ndarray:
    flat = np.frombuffer(body, dtype="<f4").astype(np.float64)
    return flat[0::2] + 1j * flat[1::2]
