"""Frame assembly and parsing: preamble, delimiters, header, payload, CRC.

Frame layout on air (see docs/frame-format.md):

    n_pre upchirps | sync word symbol 1 | sync word symbol 2 |
    2 downchirps | quarter downchirp | header symbols (optional) |
    payload (+ CRC) symbols

The two sync-word symbols plus the 2.25 downchirps form the 4.25-symbol
delimiter that separates the repeating preamble from the data section and
gives the receiver an unambiguous end-of-preamble landmark. The quarter
downchirp is the first quarter of a full downchirp.

The header is a compact open format: payload length (8 bits), cr (3 bits),
CRC-present flag (1 bit), and a 4-bit nibble-XOR checksum, always coded at
cr = 4 in its own interleaving block. The payload CRC is CRC-16/CCITT
(polynomial 0x1021, init 0x0000) over the payload bytes, appended to the
payload bits before coding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import codec
from .errors import FramingError
from .modulate import IqBuffer, gen_downchirp, gen_symbol, gen_upchirp, modulate_symbols
from .params import LoraParams

SYNC_WORD_SYMBOLS = (0x18, 0x10)
#: sync words + 2.25 downchirps, in symbol durations
DELIMITER_SYMBOLS = 4.25
HEADER_CR = 4
CRC_BITS = 16


@dataclass(frozen=True)
class FrameConfig:
    cr: int
    payload_len: int  # bytes
    has_header: bool = True
    has_crc: bool = True

    def __post_init__(self) -> None:
        if self.cr not in (1, 2, 3, 4):
            raise ValueError(f"cr must be in {{1, 2, 3, 4}}, got {self.cr}")
        if not 0 <= self.payload_len <= 255:
            raise ValueError(f"payload_len must be in [0, 255], got {self.payload_len}")


@dataclass
class Frame:
    payload: bytes
    config: FrameConfig

    def __post_init__(self) -> None:
        if len(self.payload) != self.config.payload_len:
            raise ValueError(
                f"payload is {len(self.payload)} bytes, config says {self.config.payload_len}"
            )


def crc16(data: bytes) -> int:
    """CRC-16/CCITT: polynomial 0x1021, init 0x0000, no reflection."""
    crc = 0x0000
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021 if crc & 0x8000 else crc << 1) & 0xFFFF
    return crc


def _bytes_to_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def _bits_to_bytes(bits: np.ndarray) -> bytes:
    return np.packbits(bits).tobytes()


def _header_checksum(payload_len: int, cr: int, has_crc: bool) -> int:
    n0 = (payload_len >> 4) & 0xF
    n1 = payload_len & 0xF
    n2 = ((cr << 1) | int(has_crc)) & 0xF
    return n0 ^ n1 ^ n2


def _header_bits(cfg: FrameConfig) -> np.ndarray:
    value = (
        (cfg.payload_len << 8)
        | (cfg.cr << 5)
        | (int(cfg.has_crc) << 4)
        | _header_checksum(cfg.payload_len, cfg.cr, cfg.has_crc)
    )
    return ((value >> np.arange(15, -1, -1)) & 1).astype(np.uint8)


def header_symbol_count(params: LoraParams) -> int:
    # 16 header bits always fit one cr=4 interleaving block
    return 4 + HEADER_CR


def payload_symbol_count(cfg: FrameConfig, params: LoraParams) -> int:
    bits = 8 * cfg.payload_len + (CRC_BITS if cfg.has_crc else 0)
    if bits == 0:
        return 0
    per_block = codec.data_bits_per_block(params.sf)
    blocks = -(-bits // per_block)
    return blocks * (4 + cfg.cr)


def frame_symbol_count(cfg: FrameConfig, params: LoraParams) -> int:
    """Number of data-section symbols (header + payload + CRC) in a frame."""
    n = payload_symbol_count(cfg, params)
    if cfg.has_header:
        n += header_symbol_count(params)
    return n


def frame_sample_count(cfg: FrameConfig, params: LoraParams) -> int:
    """Total IQ samples of a built frame: (n_pre + 4.25 + data symbols) blocks."""
    spb = params.samples_per_symbol
    # n_pre upchirps + 2 sync words + 2.25 downchirps + data section
    return (params.n_pre + 2 + 2 + frame_symbol_count(cfg, params)) * spb + spb // 4


def frame_data_symbols(frame: Frame, params: LoraParams) -> np.ndarray:
    """Header + payload (+ CRC) as modulation symbols."""
    cfg = frame.config
    parts = []
    if cfg.has_header:
        parts.append(codec.tx_chain(_header_bits(cfg), params, HEADER_CR))
    bits = _bytes_to_bits(frame.payload)
    if cfg.has_crc:
        crc = crc16(frame.payload)
        crc_bits = ((crc >> np.arange(15, -1, -1)) & 1).astype(np.uint8)
        bits = np.concatenate([bits, crc_bits])
    if bits.size:
        parts.append(codec.tx_chain(bits, params, cfg.cr))
    if not parts:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(parts)


def assemble_frame_iq(data_symbols, params: LoraParams) -> IqBuffer:
    """Preamble + delimiters + modulated data symbols as one IQ stream."""
    up = gen_upchirp(params).samples
    down = gen_downchirp(params).samples
    parts = [
        np.tile(up, params.n_pre),
        gen_symbol(SYNC_WORD_SYMBOLS[0], params).samples,
        gen_symbol(SYNC_WORD_SYMBOLS[1], params).samples,
        down,
        down,
        down[: params.samples_per_symbol // 4],
        modulate_symbols(data_symbols, params).samples,
    ]
    return IqBuffer(np.concatenate(parts), float(params.fs))


def build_frame(frame: Frame, params: LoraParams) -> IqBuffer:
    """Emit the complete frame as baseband IQ samples."""
    return assemble_frame_iq(frame_data_symbols(frame, params), params)


def parse_header(symbols, params: LoraParams) -> FrameConfig:
    """Decode the header block; raises FramingError on checksum/decode failure."""
    syms = np.asarray(symbols, dtype=np.int64)
    if syms.size != header_symbol_count(params):
        raise FramingError(
            f"header needs {header_symbol_count(params)} symbols, got {syms.size}"
        )
    bits, _, uncorrectable = codec.rx_chain(syms, params, HEADER_CR)
    if uncorrectable:
        raise FramingError("header block has uncorrectable errors")
    value = int(codec._pack_rows(bits[:16].reshape(1, -1))[0])
    payload_len = (value >> 8) & 0xFF
    cr = (value >> 5) & 0x7
    has_crc = bool((value >> 4) & 1)
    checksum = value & 0xF
    if cr not in (1, 2, 3, 4):
        raise FramingError(f"header carries invalid cr={cr}")
    if checksum != _header_checksum(payload_len, cr, has_crc):
        raise FramingError("header checksum mismatch")
    return FrameConfig(cr=cr, payload_len=payload_len, has_header=True, has_crc=has_crc)


def parse_payload(symbols, params: LoraParams, cfg: FrameConfig) -> tuple[Frame, bool]:
    """Decode payload (+ CRC) symbols; returns the frame and the CRC verdict."""
    syms = np.asarray(symbols, dtype=np.int64)
    need = payload_symbol_count(cfg, params)
    if syms.size < need:
        raise FramingError(f"payload needs {need} symbols, got {syms.size}")
    bits, _, _ = codec.rx_chain(syms[:need], params, cfg.cr)
    n_payload_bits = 8 * cfg.payload_len
    payload = _bits_to_bytes(bits[:n_payload_bits]) if n_payload_bits else b""
    crc_ok = True
    if cfg.has_crc:
        rx_crc = int(codec._pack_rows(bits[n_payload_bits:n_payload_bits + 16].reshape(1, -1))[0])
        crc_ok = rx_crc == crc16(payload)
    frame = Frame(payload=payload, config=FrameConfig(
        cr=cfg.cr, payload_len=cfg.payload_len, has_header=cfg.has_header, has_crc=cfg.has_crc,
    ))
    return frame, crc_ok


def parse_frame(symbols, params: LoraParams, cfg: FrameConfig | None = None) -> tuple[Frame, bool]:
    """Parse the data-section symbols of a synchronized frame.

    With ``cfg=None`` the header is decoded first; otherwise ``cfg`` states
    the out-of-band frame knowledge (and whether a header is present).
    """
    syms = np.asarray(symbols, dtype=np.int64)
    if cfg is None or cfg.has_header:
        n_hdr = header_symbol_count(params)
        parsed = parse_header(syms[:n_hdr], params)
        return parse_payload(syms[n_hdr:], params, parsed)
    return parse_payload(syms, params, cfg)
