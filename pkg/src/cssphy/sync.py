"""Receiver synchronization: preamble detection, frame sync, CFO and SFO.

The detector slides one symbol-length block at a time and demodulates each
block against the reference upchirp. Inside the repeating preamble every
block (aligned or not) peaks in the same bin, and that bin encodes the
fractional-symbol time offset, so detection looks for n_pre - 1 consecutive
agreeing peaks. Synchronization then skips to the next symbol boundary and
walks forward until the two known sync-word symbols appear, which pins the
start of the data section exactly.

A carrier offset shifts every peak by the same amount, so it is absorbed
into the timing as an integer number of samples; only the fractional-bin
residual is left for the phase-based estimator below. The estimator and
compensator sign conventions pair with ``channel.apply_cfo``: estimating a
rotated stream and compensating with the result cancels the rotation (a
tone at +f is moved to DC). The compensation index runs across the whole
buffer so one correction serves the entire frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .demod import demod_many
from .errors import SyncError
from .framing import SYNC_WORD_SYMBOLS
from .modulate import IqBuffer
from .params import LoraParams


@dataclass
class SyncState:
    detected: bool
    s_pre_hat: int = 0
    frame_start: int = 0  # stream index of the first block of the detected run


@dataclass
class CfoEstimate:
    delta_phi_hat: float  # radians of phase advance per symbol, in [-pi, pi)

    def cfo_hz(self, params: LoraParams) -> float:
        """Equivalent residual carrier offset in Hz."""
        return self.delta_phi_hat * params.bw / (2.0 * math.pi * params.chips_per_symbol)


def _bin_distance(a: int, b: int, n: int) -> int:
    d = (a - b) % n
    return min(d, n - d)


def detect_preamble(
    stream: IqBuffer,
    params: LoraParams,
    threshold: float | None = None,
    threshold_scale: float = 4.0,
) -> SyncState:
    """Slide one symbol at a time looking for n_pre - 1 agreeing peak blocks.

    Each block is dechirped and transformed; inside the repeating preamble
    every block peaks in the same bin. A window of n_pre - 1 consecutive
    block spectra is combined non-coherently (magnitude sum) before taking
    the peak, and the window counts as a detection when the combined peak
    exceeds the threshold and a majority of the blocks' own peak bins agree
    with it to within one bin. The combining keeps detection usable at low
    SNR where a single block's argmax is unreliable; on clean input every
    block agrees and the behaviour is the plain repeated-index test.

    ``threshold`` is an absolute per-block magnitude floor; when None it
    adapts to ``threshold_scale * sqrt(2^sf) * sigma_hat`` per block, with
    ``sigma_hat`` the per-sample noise estimate from the median of the
    non-peak bins (Rayleigh median).
    """
    spb = params.samples_per_symbol
    n_bins = params.chips_per_symbol
    n_blocks = len(stream.samples) // spb
    window = params.n_pre - 1
    if n_blocks < window:
        return SyncState(detected=False)
    blocks = np.asarray(stream.samples[: n_blocks * spb]).reshape(n_blocks, spb)
    peaks, mags = demod_many(blocks, params)
    if threshold is None:
        med = np.sort(mags, axis=1)[:, (n_bins - 2) // 2]
        sigma_hat = med / math.sqrt(n_bins * math.log(2.0))
        thresholds = threshold_scale * math.sqrt(n_bins) * sigma_hat
    else:
        thresholds = np.full(n_blocks, float(threshold))

    csum_mags = np.concatenate([np.zeros((1, n_bins)), np.cumsum(mags, axis=0)])
    csum_thr = np.concatenate([[0.0], np.cumsum(thresholds)])
    for b in range(n_blocks - window + 1):
        wsum = csum_mags[b + window] - csum_mags[b]
        bin_hat = int(np.argmax(wsum))
        if wsum[bin_hat] <= csum_thr[b + window] - csum_thr[b]:
            continue
        agree = sum(
            1 for i in range(b, b + window)
            if _bin_distance(int(peaks[i]), bin_hat, n_bins) <= 1
        )
        if 2 * agree >= window:
            return SyncState(detected=True, s_pre_hat=bin_hat, frame_start=b * spb)
    return SyncState(detected=False)


def synchronize(stream: IqBuffer, sync: SyncState, params: LoraParams) -> int:
    """Return the stream index of the first data-section sample.

    Skips ``(2^sf - s_pre_hat) * os`` samples to the next symbol boundary,
    then walks boundary-aligned blocks to find the sync-word pair: position
    j is scored by the spectral magnitude at the two expected sync-word
    bins (preamble bin shifted by each sync value), and the best j marks
    the end of the preamble; the remaining 2.25 delimiter symbols are then
    skipped. Any timing displacement a carrier offset has caused is
    deliberately kept.
    """
    if not sync.detected:
        raise SyncError("cannot synchronize: preamble not detected")
    spb = params.samples_per_symbol
    n_bins = params.chips_per_symbol
    samples = np.asarray(stream.samples)
    boundary = sync.frame_start + params.os * (n_bins - sync.s_pre_hat)
    n_avail = (len(samples) - boundary) // spb
    # the detection window may anchor a few blocks before the preamble, so
    # scan generously past the nominal preamble length
    n_scan = min(params.n_pre + 8, n_avail)
    if n_scan < 4:
        raise SyncError("stream too short to locate frame delimiters")
    blocks = samples[boundary: boundary + n_scan * spb].reshape(n_scan, spb)
    _, mags = demod_many(blocks, params)
    # after the boundary skip the preamble sits at bin 0 by construction
    # (up to +/-1 of rounding), so the sync words are expected at their own
    # symbol values
    c = 0
    s1, s2 = SYNC_WORD_SYMBOLS

    def near(m: np.ndarray, b: int) -> float:
        return max(m[(b - 1) % n_bins], m[b % n_bins], m[(b + 1) % n_bins])

    # candidate j = first sync-word block; the preamble term at j-1 stops a
    # random data-symbol pair from impersonating the two sync words
    best_j, best_score = -1, -1.0
    for j in range(1, n_scan - 1):
        score = near(mags[j - 1], c) + near(mags[j], c + s1) + near(mags[j + 1], c + s2)
        if score > best_score:
            best_j, best_score = j, score
    if best_j < 0:
        raise SyncError("frame delimiters not found after preamble")
    return boundary + (best_j + 2) * spb + (9 * spb) // 4


def estimate_residual_cfo(preamble: IqBuffer, params: LoraParams) -> CfoEstimate:
    """Estimate the per-symbol phase advance from consecutive preamble upchirps.

    Correlates each sample with its counterpart one symbol later, summed
    over every available upchirp pair; more pairs average down the noise.
    """
    spb = params.samples_per_symbol
    samples = np.asarray(preamble.samples)
    n_up = len(samples) // spb
    if n_up < 2:
        raise ValueError(f"need at least 2 preamble symbols, got {len(samples)} samples")
    m = n_up * spb
    acc = np.sum(samples[: m - spb] * np.conj(samples[spb: m]))
    return CfoEstimate(float(np.angle(acc)))


def compensate_cfo(samples: IqBuffer, est: CfoEstimate, params: LoraParams) -> IqBuffer:
    """Derotate by the estimated phase slope; magnitudes are untouched."""
    n = np.arange(len(samples.samples))
    rot = np.exp(1j * n * (est.delta_phi_hat / params.samples_per_symbol))
    return IqBuffer(samples.samples * rot, samples.rate)


@dataclass
class SfoTracker:
    """Tracks where half a sample of boundary drift has accumulated.

    ``fs_rx`` is the actual receiver rate and ``bw`` the transmitter chirp
    bandwidth; the nominal receiver rate is ``os * bw``. The k-th drift
    point is the first output sample index m with
    ``m * (fs_rx - os*bw) > os*bw * (k + 1/2)`` (mirrored for a slow
    receiver clock), i.e. one realignment per accumulated sample of drift,
    at a resolution of half a sample period.
    """

    bw: float
    fs_rx: float
    os: int = 1
    drops_done: int = field(default=0)

    @property
    def fs_nominal(self) -> float:
        return self.os * self.bw

    def drift_points(self, first_k: int, last_m: int) -> np.ndarray:
        """Output indices of drift events k = first_k, first_k+1, ... below last_m."""
        delta = abs(self.fs_rx - self.fs_nominal)
        if delta == 0.0:
            return np.zeros(0, dtype=np.int64)
        points = []
        k = first_k
        while True:
            m = int(math.floor(self.fs_nominal * (k + 0.5) / delta)) + 1
            if m >= last_m:
                break
            points.append(m)
            k += 1
        return np.asarray(points, dtype=np.int64)

    def next_drift_sample(self) -> int | None:
        """Absolute output index of the next half-sample drift event."""
        delta = abs(self.fs_rx - self.fs_nominal)
        if delta == 0.0:
            return None
        return int(math.floor(self.fs_nominal * (self.drops_done + 0.5) / delta)) + 1


def sfo_next_drift(tracker: SfoTracker, sf: int) -> tuple[int, int] | None:
    """(symbol index d, in-symbol sample index n) of the next drift event."""
    m = tracker.next_drift_sample()
    if m is None:
        return None
    block = tracker.os << sf
    return m // block, m % block


def realign_stream(
    samples: IqBuffer,
    tracker: SfoTracker,
    params: LoraParams,
    n_blocks: int | None = None,
    start_sample: int = 0,
) -> np.ndarray:
    """Carve symbol blocks while discarding (or duplicating) drifted samples.

    The tracker is anchored at stream index 0 (where transmitter and
    receiver clocks are aligned); blocks of ``os * 2^sf`` output samples are
    returned starting at ``start_sample`` in realigned output coordinates.
    A fast receiver clock drops one input sample per drift event, a slow
    one duplicates one instead. Raises if the stream ends mid-symbol for
    the requested block count.
    """
    spb = params.samples_per_symbol
    x = np.asarray(samples.samples)
    fast = tracker.fs_rx >= tracker.fs_nominal
    if n_blocks is None:
        # upper bound, then shrink until the last block fits the input
        n_blocks = (len(x) - start_sample) // spb if len(x) > start_sample else 0
        while n_blocks > 0:
            end = start_sample + n_blocks * spb
            shift = len(tracker.drift_points(0, end))
            need = end + shift if fast else end - shift
            if need <= len(x):
                break
            n_blocks -= 1
        if n_blocks == 0:
            return np.zeros((0, spb), dtype=x.dtype)
    end = start_sample + n_blocks * spb
    points = tracker.drift_points(0, end)
    m = np.arange(start_sample, end)
    offs = np.searchsorted(points, m, side="right")
    idx = m + offs if fast else m - offs
    if idx[-1] >= len(x):
        raise ValueError(
            f"stream exhausted mid-symbol: need input sample {int(idx[-1])}, have {len(x)}"
        )
    tracker.drops_done = max(tracker.drops_done, int(offs[-1]))
    return x[idx].reshape(n_blocks, spb)


def sfo_reference_upchirp(params: LoraParams, fs_rx: float) -> np.ndarray:
    """Reference upchirp matching the transmitter bandwidth, sampled at fs_rx."""
    n_chips = params.chips_per_symbol
    u = np.arange(params.samples_per_symbol) * (params.bw / fs_rx)
    return np.exp(2j * np.pi * (u * u / (2.0 * n_chips) - 0.5 * u))


def estimate_sfo_ratio(preamble: IqBuffer, params: LoraParams) -> float:
    """Best-effort bw/fs_rx estimate from the preamble peak drift.

    Fits the per-block fractional peak movement across the preamble;
    intended for diagnostics, not for the realignment path, which should be
    configured with the known ratio.
    """
    spb = params.samples_per_symbol
    n_up = len(preamble.samples) // spb
    if n_up < 2:
        raise ValueError("need at least 2 preamble symbols")
    blocks = np.asarray(preamble.samples[: n_up * spb]).reshape(n_up, spb)
    spec = np.fft.fft(blocks * np.conj(sfo_reference_upchirp(params, float(params.fs)))[None, :], axis=1)
    n_fft = spec.shape[1]
    peaks = np.argmax(np.abs(spec), axis=1)
    # interpolate the fractional peak from the two neighbours, then unwrap
    frac = np.zeros(n_up)
    for i, p in enumerate(peaks):
        a = abs(spec[i, (p - 1) % n_fft])
        b = abs(spec[i, p])
        c = abs(spec[i, (p + 1) % n_fft])
        denom = a - 2 * b + c
        frac[i] = p + (0.5 * (a - c) / denom if denom else 0.0)
    rel = np.unwrap(2 * np.pi * frac / n_fft) * n_fft / (2 * np.pi)
    slope = np.polyfit(np.arange(n_up), rel, 1)[0]  # bins per symbol
    drift_per_symbol = slope / params.samples_per_symbol  # fraction of a symbol
    return 1.0 + drift_per_symbol / params.os
