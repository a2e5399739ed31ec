"""Symbol demodulation: matched-filter bank and dechirp+FFT forms.

Both forms score the ``2^sf`` candidate start frequencies and decide by
largest magnitude (non-coherent, so any constant complex channel gain
leaves the decision unchanged). At os = 1 the two forms are numerically
identical; the dechirp+FFT form is the cheap one and is what the receiver
chain uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .modulate import IqBuffer, _base_upchirp, _symbol_phase_cycles
from .params import LoraParams


@dataclass
class DemodResult:
    symbol: int
    magnitudes: np.ndarray  # (2**sf,) decision-bin magnitudes
    peak_magnitude: float


def _check_one_symbol(y: IqBuffer, params: LoraParams) -> np.ndarray:
    if len(y.samples) != params.samples_per_symbol:
        raise ValueError(
            f"buffer length {len(y.samples)} != samples_per_symbol {params.samples_per_symbol}"
        )
    if y.rate != float(params.fs):
        raise ValueError(f"buffer rate {y.rate} != params fs {params.fs}")
    return np.asarray(y.samples)


def dechirp(y: IqBuffer, params: LoraParams, reference: np.ndarray | None = None) -> IqBuffer:
    """Multiply one symbol worth of samples by the conjugate reference upchirp."""
    samples = _check_one_symbol(y, params)
    ref = _base_upchirp(params.sf, params.os) if reference is None else reference
    return IqBuffer(samples * np.conj(ref), y.rate)


def demod_many(
    blocks: np.ndarray, params: LoraParams, reference: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Demodulate a (n_blocks, samples_per_symbol) array in one shot.

    Returns (symbols, magnitudes) with magnitudes of shape (n_blocks, 2^sf).
    For os > 1 the oversampled spectrum aliases each candidate into os bins
    spaced 2^sf apart; their magnitudes are summed into one decision bin,
    which keeps the full fractional-sample timing resolution without a
    decimation filter.
    """
    ref = _base_upchirp(params.sf, params.os) if reference is None else reference
    spec = np.fft.fft(blocks * np.conj(ref)[None, :], axis=1)
    mags = np.abs(spec).reshape(len(blocks), params.os, params.chips_per_symbol).sum(axis=1)
    symbols = np.argmax(mags, axis=1)  # ties resolve to the lowest index
    return symbols, mags


def demod_dft(y: IqBuffer, params: LoraParams, reference: np.ndarray | None = None) -> DemodResult:
    """Dechirp then FFT; decision bin is the magnitude argmax."""
    samples = _check_one_symbol(y, params)
    symbols, mags = demod_many(samples[None, :], params, reference)
    return DemodResult(int(symbols[0]), mags[0], float(mags[0, symbols[0]]))


@lru_cache(maxsize=16)
def _reference_bank(sf: int, os: int) -> np.ndarray:
    """All candidate symbol waveforms, shape (2^sf, os*2^sf)."""
    from .params import make_params

    params = make_params(sf, 125_000, os)
    phase = _symbol_phase_cycles(np.arange(1 << sf), params)
    bank = np.exp(2j * np.pi * phase)
    bank.flags.writeable = False
    return bank


def demod_matched_filter(y: IqBuffer, params: LoraParams) -> DemodResult:
    """Correlate against every candidate symbol waveform and pick the argmax."""
    samples = _check_one_symbol(y, params)
    bank = _reference_bank(params.sf, params.os)
    mags = np.abs(bank.conj() @ samples)
    symbol = int(np.argmax(mags))
    return DemodResult(symbol, mags, float(mags[symbol]))
