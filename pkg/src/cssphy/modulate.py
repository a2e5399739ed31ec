"""Chirp waveform generation: data symbols, up/downchirps, symbol streams.

All generators are pure functions of (symbol, params). Phase is evaluated
from the closed-form exponent rather than by accumulating per-sample
increments, so there is no phase drift at any oversampling factor. Each
symbol starts at phase zero; symbols carry no phase memory across
boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .params import LoraParams


@dataclass
class IqBuffer:
    """Complex baseband samples with their sample rate in Hz."""

    samples: np.ndarray
    rate: float

    def __len__(self) -> int:
        return len(self.samples)


def _validate_symbol(s: int, params: LoraParams) -> None:
    if not 0 <= s < params.chips_per_symbol:
        raise ValueError(
            f"symbol {s} out of range [0, {params.chips_per_symbol}) for sf={params.sf}"
        )


def _symbol_phase_cycles(symbols: np.ndarray, params: LoraParams) -> np.ndarray:
    """Phase in cycles, shape (n_symbols, samples_per_symbol).

    The instantaneous frequency ramps from ``s*bw/2^sf - bw/2`` up to the
    Nyquist edge ``+bw/2`` and folds to ``-bw/2`` at chip offset ``2^sf - s``;
    the fold shows up as the -1 step in the linear coefficient below.
    """
    n_chips = params.chips_per_symbol
    u = np.arange(params.samples_per_symbol) / params.os  # chip offsets
    s_col = symbols[:, None].astype(np.float64)
    lin = np.where(u[None, :] < n_chips - s_col, s_col / n_chips - 0.5, s_col / n_chips - 1.5)
    return u * u / (2.0 * n_chips) + lin * u


@lru_cache(maxsize=64)
def _base_upchirp(sf: int, os: int) -> np.ndarray:
    n_chips = 1 << sf
    u = np.arange(os << sf) / os
    x = np.exp(2j * np.pi * (u * u / (2.0 * n_chips) - 0.5 * u))
    x.flags.writeable = False
    return x


def gen_symbol(s: int, params: LoraParams) -> IqBuffer:
    """Generate the discrete-time chirp for one data symbol."""
    _validate_symbol(s, params)
    phase = _symbol_phase_cycles(np.array([s]), params)[0]
    return IqBuffer(np.exp(2j * np.pi * phase), float(params.fs))


def gen_upchirp(params: LoraParams) -> IqBuffer:
    """Base upchirp (symbol 0); also the dechirping reference."""
    return IqBuffer(_base_upchirp(params.sf, params.os).copy(), float(params.fs))


def gen_downchirp(params: LoraParams) -> IqBuffer:
    """Element-wise complex conjugate of the base upchirp."""
    return IqBuffer(np.conj(_base_upchirp(params.sf, params.os)), float(params.fs))


def modulate_symbols(symbols: Iterable[int] | Sequence[int], params: LoraParams) -> IqBuffer:
    """Concatenate symbol chirps back to back with no inter-symbol gaps."""
    arr = np.asarray(list(symbols), dtype=np.int64)
    if arr.size == 0:
        return IqBuffer(np.zeros(0, dtype=np.complex128), float(params.fs))
    if arr.min() < 0 or arr.max() >= params.chips_per_symbol:
        bad = arr[(arr < 0) | (arr >= params.chips_per_symbol)][0]
        raise ValueError(f"symbol {bad} out of range [0, {params.chips_per_symbol})")
    phase = _symbol_phase_cycles(arr, params)
    return IqBuffer(np.exp(2j * np.pi * phase).reshape(-1), float(params.fs))
