"""Channel impairment injection: AWGN, block fading, CFO, SFO, time delay.

Composition order is fixed: synthesize (with SFO if any) -> fading -> CFO ->
delay -> AWGN. The CFO is a receiver-LO effect and therefore rotates the
faded signal; noise enters last at the receiver front end, which also puts
noise-only samples in front of a delayed frame.

Sign convention for the CFO rotation: ``apply_cfo`` multiplies by
``exp(-j*2*pi*n*cfo_hz/fs)``, so a positive offset moves the dechirped tone
of symbol s from bin s down to ``s - cfo_hz/fs * 2^sf``. The estimator and
compensator in :mod:`cssphy.sync` use the matching convention; the loopback
tests pin the pairing.

SNR definition: per-sample SNR = 1/sigma^2 with unit-magnitude signal
samples, i.e. ``sigma^2 = 10**(-snr_db/10)``. BER curves produced by this
package are comparable to each other under this definition; absolute SNR
placement against other simulators is not claimed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .framing import SYNC_WORD_SYMBOLS
from .modulate import IqBuffer
from .params import LoraParams

#: salt mixed into per-trial noise seeds so noise and payload streams differ
NOISE_SEED_SALT = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class ChannelImpairments:
    snr_db: float = math.inf
    h: complex = 1 + 0j
    cfo_hz: float = 0.0
    sfo_hz: float = 0.0
    delay_samples: int = 0
    seed: int = 0

    @property
    def noise_variance(self) -> float:
        if math.isinf(self.snr_db):
            return 0.0
        return 10.0 ** (-self.snr_db / 10.0)


def apply_awgn(y: IqBuffer, imp: ChannelImpairments) -> IqBuffer:
    """Add circular complex white Gaussian noise, reproducible from the seed."""
    var = imp.noise_variance
    if var == 0.0:
        return IqBuffer(y.samples.copy(), y.rate)
    rng = np.random.default_rng(imp.seed)
    scale = math.sqrt(var / 2.0)
    noise = scale * (rng.standard_normal(len(y.samples)) + 1j * rng.standard_normal(len(y.samples)))
    return IqBuffer(y.samples + noise, y.rate)


def apply_fading(y: IqBuffer, imp: ChannelImpairments) -> IqBuffer:
    """Multiply by the constant per-frame fading coefficient h."""
    if imp.h == 0:
        raise ValueError("fading coefficient h must be nonzero")
    return IqBuffer(y.samples * imp.h, y.rate)


def apply_cfo(y: IqBuffer, imp: ChannelImpairments, params: LoraParams) -> IqBuffer:
    """Per-sample rotation with running index across the whole buffer."""
    if imp.cfo_hz == 0.0:
        return IqBuffer(y.samples.copy(), y.rate)
    n = np.arange(len(y.samples))
    return IqBuffer(y.samples * np.exp(-2j * np.pi * n * (imp.cfo_hz / y.rate)), y.rate)


def apply_delay(y: IqBuffer, imp: ChannelImpairments) -> IqBuffer:
    """Prepend zero samples; with AWGN applied afterwards they become noise-only."""
    if imp.delay_samples < 0:
        raise ValueError("delay_samples must be >= 0")
    if imp.delay_samples == 0:
        return IqBuffer(y.samples.copy(), y.rate)
    pad = np.zeros(imp.delay_samples, dtype=y.samples.dtype)
    return IqBuffer(np.concatenate([pad, y.samples]), y.rate)


def apply_channel(y: IqBuffer, imp: ChannelImpairments, params: LoraParams) -> IqBuffer:
    """Fading -> CFO -> delay -> AWGN (synthesis happens upstream)."""
    out = apply_fading(y, imp)
    out = apply_cfo(out, imp, params)
    out = apply_delay(out, imp)
    return apply_awgn(out, imp)


def receiver_rate(params: LoraParams, imp: ChannelImpairments) -> float:
    """Actual receiver sample rate: os * (bw + sfo), i.e. the same oscillator
    ppm error at every oversampling factor."""
    return params.os * (params.bw + imp.sfo_hz)


def synthesize_with_sfo(
    symbols,
    params: LoraParams,
    imp: ChannelImpairments,
    include_delimiters: bool = True,
) -> IqBuffer:
    """Sample the continuous-time frame waveform at the receiver's clock.

    The transmitted frame is a sequence of chirp segments on an exact
    time grid set by the transmitter bandwidth; the receiver observes it at
    instants ``t = n / fs_rx``. Evaluating the closed-form chirp phase at
    those instants gives the exact received stream, including the cumulative
    symbol-boundary drift and the inter-symbol leakage at block edges; no
    resampling filter is involved. With ``sfo_hz = 0`` the output equals the
    nominal modulation path sample for sample.
    """
    syms = np.asarray(symbols, dtype=np.int64)
    n_chips = params.chips_per_symbol
    fs_rx = receiver_rate(params, imp)

    seg_s: list[int] = []       # start bin of each segment's chirp
    seg_sign: list[int] = []    # +1 upchirp family, -1 downchirp family
    seg_len: list[int] = []     # segment length in chips
    if include_delimiters:
        for _ in range(params.n_pre):
            seg_s.append(0); seg_sign.append(1); seg_len.append(n_chips)
        for sync in SYNC_WORD_SYMBOLS:
            seg_s.append(sync); seg_sign.append(1); seg_len.append(n_chips)
        for _ in range(2):
            seg_s.append(0); seg_sign.append(-1); seg_len.append(n_chips)
        seg_s.append(0); seg_sign.append(-1); seg_len.append(n_chips // 4)
    for s in syms:
        seg_s.append(int(s)); seg_sign.append(1); seg_len.append(n_chips)

    if not seg_len:
        return IqBuffer(np.zeros(0, dtype=np.complex128), fs_rx)

    starts = np.concatenate([[0], np.cumsum(seg_len)])  # chip-unit boundaries
    total_chips = int(starts[-1])
    s_arr = np.array(seg_s, dtype=np.float64)
    sign_arr = np.array(seg_sign, dtype=np.float64)

    # samples with t = n/fs_rx strictly inside [0, total_chips/bw)
    count = int(math.floor(total_chips * fs_rx / params.bw - 1e-12)) + 1
    n = np.arange(count)
    u = n * (params.bw / fs_rx)  # chip position of each receiver sample
    idx = np.clip(np.searchsorted(starts, u, side="right") - 1, 0, len(seg_len) - 1)
    u_loc = u - starts[idx]
    s_here = s_arr[idx]
    lin = np.where(u_loc < n_chips - s_here, s_here / n_chips - 0.5, s_here / n_chips - 1.5)
    phase = sign_arr[idx] * (u_loc * u_loc / (2.0 * n_chips) + lin * u_loc)
    return IqBuffer(np.exp(2j * np.pi * phase), fs_rx)


def sfo_dechirp_tone_cycles(s: int, d: int, params: LoraParams, imp: ChannelImpairments) -> tuple[float, float]:
    """Predicted dechirped tone frequency (cycles/sample) for the d-th symbol.

    Returns the (pre-fold, post-fold) linear phase coefficients of the
    dechirped symbol when the receiver dechirps block d with a reference
    upchirp matching the transmitter bandwidth at its own sample rate.
    """
    rho = params.bw / receiver_rate(params, imp)
    drift = d * (params.os * rho * rho - rho)
    pre = (s / params.chips_per_symbol) * rho + drift
    return pre, pre - rho


def sfo_peak_bin_prediction(s: int, d: int, params: LoraParams, imp: ChannelImpairments) -> float:
    """Predicted FFT peak location (fractional bin of the full-size FFT)."""
    pre, _ = sfo_dechirp_tone_cycles(s, d, params, imp)
    return pre * params.samples_per_symbol


def trial_key(master_seed: int, trial: int) -> int:
    """Canonical per-trial substream key: master seed XOR trial index."""
    return (master_seed ^ trial) & 0x7FFFFFFFFFFFFFFF


def trial_impairments(template: ChannelImpairments, master_seed: int, trial: int) -> ChannelImpairments:
    """Derive the per-trial impairment set; the noise seed is the salted trial key."""
    return replace(template, seed=trial_key(master_seed, trial) ^ NOISE_SEED_SALT)
