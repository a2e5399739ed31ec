"""Bit-domain coding chain: Hamming code, whitening, interleaving, Gray map.

Transmit order is encode -> whiten -> interleave -> Gray-map to symbols;
the receive chain inverts each stage. Wire compatibility with commercial
radios is out of scope, so every mapping below is fixed by this package
and documented in docs/frame-format.md:

* systematic Hamming codewords ``[d0 d1 d2 d3 p0 p1 p2 p3]`` with
  ``p0 = d0^d1^d3``, ``p1 = d0^d2^d3``, ``p2 = d1^d2^d3`` and overall
  parity ``p3``; cr in {1, 2} keeps only the first cr parity bits
  (error detection only, no correction),
* whitening by a 9-bit maximal-length LFSR, polynomial x^9 + x^5 + 1,
  seed 0x1FF, restarted at each chain invocation,
* diagonal interleaver: word ``i`` bit position ``(i + j) mod sf`` takes
  codeword ``j`` bit ``i`` (word bit position 0 is the MSB),
* binary-reflected Gray code; the transmitter maps an interleaved word
  to the symbol whose Gray code it is, so that a +/-1 demodulation error
  costs exactly one bit in one codeword after deinterleaving.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .params import LoraParams

_WHITEN_POLY_TAPS = (8, 4)  # x^9 + x^5 + 1, Fibonacci form, state bits [s8..s0]
_WHITEN_SEED = 0x1FF


def _as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("bit block must be one-dimensional")
    if arr.size and arr.max() > 1:
        raise ValueError("bit block must contain only 0/1 values")
    return arr


def _check_cr(cr: int) -> int:
    if cr not in (1, 2, 3, 4):
        raise ValueError(f"cr must be in {{1, 2, 3, 4}}, got {cr}")
    return cr


# ---------------------------------------------------------------------------
# Hamming code
# ---------------------------------------------------------------------------

def _encode_nibble(d: tuple[int, int, int, int]) -> list[int]:
    d0, d1, d2, d3 = d
    p0 = d0 ^ d1 ^ d3
    p1 = d0 ^ d2 ^ d3
    p2 = d1 ^ d2 ^ d3
    cw = [d0, d1, d2, d3, p0, p1, p2]
    cw.append(cw[0] ^ cw[1] ^ cw[2] ^ cw[3] ^ cw[4] ^ cw[5] ^ cw[6])
    return cw


# syndrome (s0 | s1<<1 | s2<<2) -> flipped bit position in the 7-bit codeword
_SYNDROME_POS = {3: 0, 5: 1, 6: 2, 7: 3, 1: 4, 2: 5, 4: 6}


def _decode_word(bits: tuple[int, ...], cr: int) -> tuple[int, int, bool]:
    """Decode one received word; returns (nibble bits packed, corrected, uncorrectable)."""
    w = list(bits)
    corrected = 0
    uncorrectable = False
    if cr >= 3:
        s0 = w[0] ^ w[1] ^ w[3] ^ w[4]
        s1 = w[0] ^ w[2] ^ w[3] ^ w[5]
        s2 = w[1] ^ w[2] ^ w[3] ^ w[6]
        syn = s0 | (s1 << 1) | (s2 << 2)
        if cr == 3:
            if syn:
                w[_SYNDROME_POS[syn]] ^= 1
                corrected = 1
        else:
            overall = 0
            for b in w:
                overall ^= b
            if overall:  # odd parity: a single error somewhere, correctable
                if syn:
                    w[_SYNDROME_POS[syn]] ^= 1
                # else the error was in the overall parity bit itself
                corrected = 1
            elif syn:  # even parity but nonzero syndrome: double error
                uncorrectable = True
    else:
        ref = _encode_nibble(tuple(w[:4]))[4:4 + cr]
        if list(w[4:]) != ref:
            uncorrectable = True
    nib = (w[0] << 3) | (w[1] << 2) | (w[2] << 1) | w[3]
    return nib, corrected, uncorrectable


@lru_cache(maxsize=8)
def _encode_lut(cr: int) -> np.ndarray:
    lut = np.zeros((16, 4 + cr), dtype=np.uint8)
    for v in range(16):
        d = ((v >> 3) & 1, (v >> 2) & 1, (v >> 1) & 1, v & 1)
        lut[v] = _encode_nibble(d)[: 4 + cr]
    lut.flags.writeable = False
    return lut


@lru_cache(maxsize=8)
def _decode_lut(cr: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = 4 + cr
    nibbles = np.zeros(1 << n, dtype=np.uint8)
    corrected = np.zeros(1 << n, dtype=np.uint8)
    uncorrectable = np.zeros(1 << n, dtype=bool)
    for v in range(1 << n):
        bits = tuple((v >> (n - 1 - i)) & 1 for i in range(n))
        nibbles[v], corrected[v], uncorrectable[v] = _decode_word(bits, cr)
    for a in (nibbles, corrected, uncorrectable):
        a.flags.writeable = False
    return nibbles, corrected, uncorrectable


def _pack_rows(bits2d: np.ndarray) -> np.ndarray:
    """Rows of bits (MSB first) -> integers."""
    weights = 1 << np.arange(bits2d.shape[1] - 1, -1, -1)
    return bits2d.astype(np.int64) @ weights


def hamming_encode(data, cr: int) -> np.ndarray:
    """Encode each 4-bit nibble into a (4+cr)-bit systematic codeword."""
    _check_cr(cr)
    bits = _as_bits(data)
    if bits.size % 4:
        raise ValueError(f"data length {bits.size} is not a multiple of 4")
    nibbles = _pack_rows(bits.reshape(-1, 4))
    return _encode_lut(cr)[nibbles].reshape(-1)


def hamming_decode(coded, cr: int) -> tuple[np.ndarray, int, bool]:
    """Decode codewords; returns (data bits, corrected bit count, uncorrectable flag).

    cr = 3 corrects any single error per codeword; cr = 4 additionally flags
    double errors; cr in {1, 2} only reports parity violations.
    """
    _check_cr(cr)
    bits = _as_bits(coded)
    n = 4 + cr
    if bits.size % n:
        raise ValueError(f"coded length {bits.size} is not a multiple of {n}")
    idx = _pack_rows(bits.reshape(-1, n))
    nib_lut, corr_lut, bad_lut = _decode_lut(cr)
    nibbles = nib_lut[idx]
    data = ((nibbles[:, None] >> np.array([3, 2, 1, 0])) & 1).astype(np.uint8)
    return data.reshape(-1), int(corr_lut[idx].sum()), bool(bad_lut[idx].any())


# ---------------------------------------------------------------------------
# Whitening
# ---------------------------------------------------------------------------

@lru_cache(maxsize=1)
def _whitening_period() -> np.ndarray:
    state = _WHITEN_SEED
    out = np.empty(511, dtype=np.uint8)
    for i in range(511):
        out[i] = (state >> 8) & 1
        fb = ((state >> _WHITEN_POLY_TAPS[0]) ^ (state >> _WHITEN_POLY_TAPS[1])) & 1
        state = ((state << 1) | fb) & 0x1FF
    out.flags.writeable = False
    return out


def whitening_sequence(n: int) -> np.ndarray:
    """First n bits of the whitening PRBS (period 511)."""
    period = _whitening_period()
    reps = -(-n // 511)
    return np.tile(period, reps)[:n]


def whiten(data) -> np.ndarray:
    """XOR with the whitening PRBS; applying it twice is the identity."""
    bits = _as_bits(data)
    return bits ^ whitening_sequence(bits.size)


dewhiten = whiten


# ---------------------------------------------------------------------------
# Interleaving
# ---------------------------------------------------------------------------

def _interleave_gather(sf: int, cr: int) -> tuple[np.ndarray, np.ndarray]:
    n = 4 + cr
    i_grid, q_grid = np.meshgrid(np.arange(n), np.arange(sf), indexing="ij")
    return (q_grid - i_grid) % sf, i_grid


def interleave(block, sf: int, cr: int) -> np.ndarray:
    """One block of sf codewords -> (4+cr) words of sf bits each (as integers)."""
    _check_cr(cr)
    bits = _as_bits(block)
    n = 4 + cr
    if bits.size != sf * n:
        raise ValueError(f"block length {bits.size} != sf*(4+cr) = {sf * n}")
    cw = bits.reshape(sf, n)
    j_idx, i_idx = _interleave_gather(sf, cr)
    words = cw[j_idx, i_idx]  # words[i, q] = codeword (q-i)%sf bit i
    return _pack_rows(words)


def deinterleave(words, sf: int, cr: int) -> np.ndarray:
    """Inverse of :func:`interleave`; words back to one block of codeword bits."""
    _check_cr(cr)
    w = np.asarray(words, dtype=np.int64)
    n = 4 + cr
    if w.size != n:
        raise ValueError(f"expected {n} words, got {w.size}")
    bits = ((w[:, None] >> np.arange(sf - 1, -1, -1)) & 1).astype(np.uint8)
    j_idx, i_idx = _interleave_gather(sf, cr)
    cw = np.zeros((sf, n), dtype=np.uint8)
    cw[j_idx, i_idx] = bits
    return cw.reshape(-1)


# ---------------------------------------------------------------------------
# Gray mapping
# ---------------------------------------------------------------------------

def _gray(x: np.ndarray) -> np.ndarray:
    return x ^ (x >> 1)


def _gray_inv(g: np.ndarray) -> np.ndarray:
    x = np.array(g, copy=True)
    for shift in (1, 2, 4, 8):
        x ^= x >> shift
    return x


def gray_index(word: int, sf: int) -> int:
    """Binary-reflected Gray code of ``word``; adjacent inputs differ in one bit."""
    if not 0 <= word < (1 << sf):
        raise ValueError(f"word {word} out of range [0, 2^{sf})")
    return int(word ^ (word >> 1))


def gray_deindex(value: int, sf: int) -> int:
    """Inverse Gray map; ``gray_deindex(gray_index(w)) == w``."""
    if not 0 <= value < (1 << sf):
        raise ValueError(f"value {value} out of range [0, 2^{sf})")
    return int(_gray_inv(np.int64(value)))


# ---------------------------------------------------------------------------
# Full chain
# ---------------------------------------------------------------------------

def data_bits_per_block(sf: int) -> int:
    return 4 * sf


def pad_payload(bits, sf: int) -> np.ndarray:
    """Zero-pad to a whole number of interleaving blocks."""
    arr = _as_bits(bits)
    per_block = data_bits_per_block(sf)
    pad = (-arr.size) % per_block
    if pad:
        arr = np.concatenate([arr, np.zeros(pad, dtype=np.uint8)])
    return arr


def tx_chain(payload, params: LoraParams, cr: int) -> np.ndarray:
    """Payload bits -> data symbols (encode, whiten, interleave, Gray-map)."""
    _check_cr(cr)
    sf = params.sf
    bits = pad_payload(payload, sf)
    if bits.size == 0:
        return np.zeros(0, dtype=np.int64)
    coded = whiten(hamming_encode(bits, cr))
    n = 4 + cr
    blocks = coded.reshape(-1, sf * n)
    words = np.concatenate([interleave(b, sf, cr) for b in blocks])
    # Transmit the symbol whose Gray code is the word: the receiver applies
    # the forward Gray map, so adjacent-bin errors land one bit apart.
    return _gray_inv(words)


def rx_chain(symbols, params: LoraParams, cr: int) -> tuple[np.ndarray, int, bool]:
    """Data symbols -> payload bits plus (corrected count, uncorrectable flag)."""
    _check_cr(cr)
    sf = params.sf
    syms = np.asarray(symbols, dtype=np.int64)
    n = 4 + cr
    if syms.size % n:
        raise ValueError(f"symbol count {syms.size} is not a multiple of 4+cr = {n}")
    if syms.size == 0:
        return np.zeros(0, dtype=np.uint8), 0, False
    words = _gray(syms)
    coded = np.concatenate(
        [deinterleave(w, sf, cr) for w in words.reshape(-1, n)]
    )
    return hamming_decode(dewhiten(coded), cr)
