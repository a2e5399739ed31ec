"""Monte-Carlo bit-error-rate harness and the built-in offset experiments.

Each trial draws a random payload, runs it through the coding chain and
frame builder, applies channel impairments, and feeds one of the receiver
variants below. Bit errors are counted on the payload bits after decoding;
symbol errors are counted on the raw demodulated symbols. A failed
detection or synchronization scores the whole frame as errored.

Receiver modes
--------------
``aligned-no-comp``
    Genie symbol timing (true frame boundary), no offset handling at all.
``timeoffset-sync``
    Honest preamble detection and delimiter synchronization; the carrier
    offset is absorbed into the timing, the fractional residual stays.
``timeoffset-sync+cfo-comp``
    As above plus residual estimation on the preamble and derotation.
``sfo-no-realign``
    Known frame start, reference upchirp matched to the transmitter
    bandwidth, symbol blocks taken on the nominal grid (boundary drift
    accumulates freely).
``sfo-realign``
    As above, but one sample is dropped (or duplicated) whenever half a
    sample of drift has accumulated.

Trials are reproducible: trial k of a point uses substream key
``seed ^ k`` for the payload and a salted variant for the noise, so
results do not depend on worker count or scheduling. Points stop once
both the minimum bit-error and minimum frame counts are reached (or at
the frame cap), evaluated at fixed chunk boundaries.
"""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import codec
from .channel import (
    ChannelImpairments,
    apply_channel,
    receiver_rate,
    synthesize_with_sfo,
    trial_impairments,
    trial_key,
)
from .demod import demod_many
from .errors import SyncError
from .framing import assemble_frame_iq
from .modulate import IqBuffer
from .params import LoraParams, make_params
from .receiver import receive_symbols
from .sync import SfoTracker, realign_stream, sfo_reference_upchirp

RECEIVER_MODES = (
    "aligned-no-comp",
    "timeoffset-sync",
    "timeoffset-sync+cfo-comp",
    "sfo-no-realign",
    "sfo-realign",
)

#: permissive detection threshold scale for low-SNR sweeps; false runs are
#: already suppressed by the consecutive-equal-peak requirement
SWEEP_DETECT_SCALE = 2.5

DEFAULT_SEED = 0xC0FFEE
CHUNK_FRAMES = 32

CSV_COLUMNS = (
    "snr_db", "frames", "bits", "bit_errors", "symbol_errors", "frame_errors",
    "ber", "mode", "cfo_hz", "sfo_hz", "sf", "cr", "os", "seed",
)


@dataclass(frozen=True)
class StopRule:
    min_bit_errors: int = 100
    max_frames: int = 100_000
    min_frames: int = 30

    def __post_init__(self) -> None:
        if self.min_bit_errors < 1:
            raise ValueError("min_bit_errors must be >= 1")
        if self.max_frames < 1:
            raise ValueError("max_frames must be >= 1")


@dataclass(frozen=True)
class SweepSpec:
    params: LoraParams
    cr: int
    frame_len_symbols: int
    snr_points: tuple[float, ...]
    impairments: ChannelImpairments
    receiver_mode: str
    stop: StopRule = StopRule()

    def __post_init__(self) -> None:
        if self.receiver_mode not in RECEIVER_MODES:
            raise ValueError(f"unknown receiver_mode {self.receiver_mode!r}")
        if len(self.snr_points) == 0:
            raise ValueError("snr_points must not be empty")
        if self.frame_len_symbols % (4 + self.cr):
            raise ValueError("frame_len_symbols must be a multiple of 4+cr")
        if self.receiver_mode.startswith("sfo") and self.impairments.delay_samples:
            raise ValueError("sfo modes assume delay_samples = 0")

    @property
    def payload_bits_per_frame(self) -> int:
        blocks = self.frame_len_symbols // (4 + self.cr)
        return blocks * codec.data_bits_per_block(self.params.sf)


@dataclass
class BerRecord:
    snr_db: float
    frames: int
    bits: int
    bit_errors: int
    symbol_errors: int
    frame_errors: int
    ber: float
    wall_time: float = field(default=0.0, compare=False)
    hit_min_errors: bool = False


def _receive_frame(spec: SweepSpec, stream: IqBuffer, imp: ChannelImpairments) -> np.ndarray | None:
    """Run the configured receiver variant; None means the frame was lost."""
    params = spec.params
    spb = params.samples_per_symbol
    n_sym = spec.frame_len_symbols
    lead_in = (params.n_pre + 4) * spb + spb // 4  # preamble + 4.25 delimiters
    mode = spec.receiver_mode
    if mode == "aligned-no-comp":
        start = imp.delay_samples + lead_in
        blocks = np.asarray(stream.samples[start: start + n_sym * spb]).reshape(n_sym, spb)
        symbols, _ = demod_many(blocks, params)
        return symbols
    if mode in ("timeoffset-sync", "timeoffset-sync+cfo-comp"):
        try:
            symbols, _ = receive_symbols(
                stream, params, n_sym,
                compensate=mode.endswith("cfo-comp"),
                threshold_scale=SWEEP_DETECT_SCALE,
            )
        except SyncError:
            return None
        return symbols
    # sfo modes: frame start known, reference matched to the tx bandwidth
    fs_rx = receiver_rate(params, imp)
    ref = sfo_reference_upchirp(params, fs_rx)
    if mode == "sfo-realign":
        tracker = SfoTracker(bw=params.bw, fs_rx=fs_rx, os=params.os)
        try:
            blocks = realign_stream(stream, tracker, params, n_blocks=n_sym, start_sample=lead_in)
        except ValueError:
            return None
    else:
        end = lead_in + n_sym * spb
        if end > len(stream.samples):
            return None
        blocks = np.asarray(stream.samples[lead_in:end]).reshape(n_sym, spb)
    symbols, _ = demod_many(blocks, params, reference=ref)
    return symbols


def _simulate_frame(
    spec: SweepSpec, snr_db: float, seed: int, trial: int
) -> tuple[int, int, int]:
    """One trial; returns (bit_errors, symbol_errors, frame_error)."""
    params = spec.params
    payload_rng = np.random.default_rng(trial_key(seed, trial))
    bits = payload_rng.integers(0, 2, spec.payload_bits_per_frame, dtype=np.uint8)
    tx_symbols = codec.tx_chain(bits, params, spec.cr)
    imp = trial_impairments(replace(spec.impairments, snr_db=snr_db), seed, trial)
    if spec.receiver_mode.startswith("sfo"):
        clean = synthesize_with_sfo(tx_symbols, params, imp)
    else:
        clean = assemble_frame_iq(tx_symbols, params)
    # one symbol of trailing silence: the capture outlives the frame, so a
    # sync offset of up to half a symbol still has samples to read
    tail = np.zeros(params.samples_per_symbol, dtype=np.complex128)
    clean = IqBuffer(np.concatenate([clean.samples, tail]), clean.rate)
    stream = apply_channel(clean, imp, params)
    rx_symbols = _receive_frame(spec, stream, imp)
    if rx_symbols is None:
        return bits.size, tx_symbols.size, 1
    symbol_errors = int(np.count_nonzero(rx_symbols != tx_symbols))
    rx_bits, _, _ = codec.rx_chain(rx_symbols, params, spec.cr)
    bit_errors = int(np.count_nonzero(rx_bits[: bits.size] != bits))
    return bit_errors, symbol_errors, int(bit_errors > 0)


def _run_chunk(
    spec: SweepSpec, snr_db: float, seed: int, first_trial: int, n_trials: int
) -> tuple[int, int, int, int, int]:
    frames = bits = bit_errors = symbol_errors = frame_errors = 0
    for trial in range(first_trial, first_trial + n_trials):
        be, se, fe = _simulate_frame(spec, snr_db, seed, trial)
        frames += 1
        bits += spec.payload_bits_per_frame
        bit_errors += be
        symbol_errors += se
        frame_errors += fe
    return frames, bits, bit_errors, symbol_errors, frame_errors


def run_point(
    spec: SweepSpec,
    snr_db: float,
    seed: int = DEFAULT_SEED,
    pool: ProcessPoolExecutor | None = None,
    chunk_frames: int = CHUNK_FRAMES,
) -> BerRecord:
    """Monte-Carlo one SNR point until the stopping rule fires.

    Trials are consumed in fixed-size chunks and accumulated in chunk
    order, so the result is identical for any pool size (a pool only
    prefetches chunks speculatively).
    """
    t0 = time.perf_counter()
    stop = spec.stop
    frames = bits = bit_errors = symbol_errors = frame_errors = 0
    pending: dict[int, object] = {}
    next_submit = 0
    taken = 0
    window = 4 * (getattr(pool, "_max_workers", 1) if pool is not None else 0)

    def chunk_bounds(c: int) -> tuple[int, int]:
        first = c * chunk_frames
        return first, min(chunk_frames, stop.max_frames - first)

    while True:
        if pool is not None:
            while next_submit < taken + max(window, 1):
                first, n = chunk_bounds(next_submit)
                if n <= 0:
                    break
                pending[next_submit] = pool.submit(_run_chunk, spec, snr_db, seed, first, n)
                next_submit += 1
            fut = pending.pop(taken, None)
            if fut is None:
                break
            res = fut.result()
        else:
            first, n = chunk_bounds(taken)
            if n <= 0:
                break
            res = _run_chunk(spec, snr_db, seed, first, n)
        taken += 1
        frames += res[0]
        bits += res[1]
        bit_errors += res[2]
        symbol_errors += res[3]
        frame_errors += res[4]
        hit = bit_errors >= stop.min_bit_errors and frames >= stop.min_frames
        if hit or frames >= stop.max_frames:
            break
    for fut in pending.values():
        fut.cancel()
    ber = bit_errors / bits if bits else 0.0
    assert 0.0 <= ber <= 1.0 and frame_errors <= frames
    return BerRecord(
        snr_db=snr_db, frames=frames, bits=bits, bit_errors=bit_errors,
        symbol_errors=symbol_errors, frame_errors=frame_errors, ber=ber,
        wall_time=time.perf_counter() - t0,
        hit_min_errors=bit_errors >= stop.min_bit_errors,
    )


def run_sweep(
    spec: SweepSpec,
    seed: int = DEFAULT_SEED,
    workers: int | None = 1,
    stop_below_ber: float | None = None,
    pool: ProcessPoolExecutor | None = None,
) -> list[BerRecord]:
    """Run every SNR point of the spec in order.

    ``stop_below_ber`` ends the sweep early once a point's BER falls below
    the given value (the curve has dived past the region of interest).
    """
    own_pool = None
    if pool is None and workers != 1:
        own_pool = ProcessPoolExecutor(max_workers=workers)
        pool = own_pool
    try:
        records = []
        for snr_db in spec.snr_points:
            rec = run_point(spec, snr_db, seed=seed, pool=pool)
            records.append(rec)
            if stop_below_ber is not None and rec.ber < stop_below_ber:
                break
        return records
    finally:
        if own_pool is not None:
            own_pool.shutdown()


# ---------------------------------------------------------------------------
# Built-in experiments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Curve:
    label: str
    spec: SweepSpec
    stop_below_ber: float | None


def _snr_grid(lo: float, hi: float, step: float) -> tuple[float, ...]:
    n = int(round((hi - lo) / step)) + 1
    return tuple(round(lo + i * step, 4) for i in range(n))


def fig2_curves(fast: bool = False) -> list[Curve]:
    """CFO experiment: SF 8, rate-1/2 extended-Hamming coding, offsets of
    10 kHz and 10.1 kHz against a clean baseline, three receiver variants."""
    params = make_params(8, 125_000, os=1, n_pre=8)
    grid = _snr_grid(-11.5, 12.0, 0.5)
    stop = StopRule(min_bit_errors=100, max_frames=20_000, min_frames=32)
    if fast:
        grid = _snr_grid(-11.5, -9.5, 1.0)
        stop = StopRule(min_bit_errors=40, max_frames=400, min_frames=16)
    base_imp = ChannelImpairments(delay_samples=300)

    def spec(mode: str, cfo_hz: float) -> SweepSpec:
        return SweepSpec(
            params=params, cr=4, frame_len_symbols=32, snr_points=grid,
            impairments=replace(base_imp, cfo_hz=cfo_hz), receiver_mode=mode, stop=stop,
        )

    curves = [Curve("baseline", spec("timeoffset-sync+cfo-comp", 0.0), 3e-4)]
    for cfo in (10_000.0, 10_100.0):
        tag = f"cfo{cfo / 1000:g}k"
        curves.append(Curve(f"{tag}-no-comp", spec("aligned-no-comp", cfo), None))
        curves.append(Curve(f"{tag}-timeoffset-sync", spec("timeoffset-sync", cfo), 3e-4))
        curves.append(Curve(f"{tag}-cfo-comp", spec("timeoffset-sync+cfo-comp", cfo), 3e-4))
    return curves


def fig3_curves(fast: bool = False) -> list[Curve]:
    """SFO experiment: SF 8, 250 kHz bandwidth, offsets of 5 Hz and 10 Hz,
    short and long frames, with and without boundary realignment (the
    realigned variant also at 2x oversampling)."""
    grid = _snr_grid(-13.0, -7.0, 1.0)
    floor_stop = StopRule(min_bit_errors=100, max_frames=2_000, min_frames=30)
    deep_stop = StopRule(min_bit_errors=100, max_frames=150, min_frames=30)
    if fast:
        grid = _snr_grid(-13.0, -11.0, 1.0)
        floor_stop = StopRule(min_bit_errors=30, max_frames=200, min_frames=8)
        deep_stop = StopRule(min_bit_errors=30, max_frames=40, min_frames=8)

    curves = []
    for sfo in (5.0, 10.0):
        for frame_len in (40, 200):
            for mode, os_fac in (("sfo-no-realign", 1), ("sfo-realign", 1), ("sfo-realign", 2)):
                params = make_params(8, 250_000, os=os_fac, n_pre=8)
                spec = SweepSpec(
                    params=params, cr=4, frame_len_symbols=frame_len, snr_points=grid,
                    impairments=ChannelImpairments(sfo_hz=sfo),
                    receiver_mode=mode,
                    stop=floor_stop if mode == "sfo-no-realign" else deep_stop,
                )
                label = f"sfo{sfo:g}hz-{frame_len}sym-{mode}-os{os_fac}"
                curves.append(Curve(label, spec, None))
    return curves


def run_curves(
    curves: list[Curve],
    seed: int = DEFAULT_SEED,
    workers: int | None = 1,
) -> list[tuple[Curve, list[BerRecord]]]:
    own_pool = None
    pool = None
    if workers != 1:
        own_pool = ProcessPoolExecutor(max_workers=workers)
        pool = own_pool
    try:
        return [
            (c, run_sweep(c.spec, seed=seed, stop_below_ber=c.stop_below_ber, pool=pool))
            for c in curves
        ]
    finally:
        if own_pool is not None:
            own_pool.shutdown()


def write_csv(results: list[tuple[Curve, list[BerRecord]]], out, seed: int) -> None:
    """Emit the pinned CSV schema; byte-identical for identical inputs."""

    def render(fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for curve, records in results:
            spec = curve.spec
            for r in records:
                writer.writerow([
                    f"{r.snr_db:g}", r.frames, r.bits, r.bit_errors,
                    r.symbol_errors, r.frame_errors, repr(r.ber),
                    spec.receiver_mode, f"{spec.impairments.cfo_hz:g}",
                    f"{spec.impairments.sfo_hz:g}", spec.params.sf, spec.cr,
                    spec.params.os, seed,
                ])

    if hasattr(out, "write"):
        render(out)
    else:
        buf = io.StringIO()
        render(buf)
        Path(out).write_text(buf.getvalue())


def replicate_fig2(
    out=None,
    seed: int = DEFAULT_SEED,
    workers: int | None = 1,
    fast: bool = False,
) -> list[tuple[Curve, list[BerRecord]]]:
    """Run the built-in CFO experiment; optionally write its CSV."""
    results = run_curves(fig2_curves(fast=fast), seed=seed, workers=workers)
    if out is not None:
        write_csv(results, out, seed)
    return results


def replicate_fig3(
    out=None,
    seed: int = DEFAULT_SEED,
    workers: int | None = 1,
    fast: bool = False,
) -> list[tuple[Curve, list[BerRecord]]]:
    """Run the built-in SFO experiment; optionally write its CSV."""
    results = run_curves(fig3_curves(fast=fast), seed=seed, workers=workers)
    if out is not None:
        write_csv(results, out, seed)
    return results
