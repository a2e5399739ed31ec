import numpy as np
import pytest

from cssphy import (
    ChannelImpairments,
    IqBuffer,
    SfoTracker,
    apply_channel,
    apply_cfo,
    compensate_cfo,
    detect_preamble,
    estimate_residual_cfo,
    gen_upchirp,
    make_params,
    realign_stream,
    sfo_next_drift,
    synchronize,
    synthesize_with_sfo,
)
from cssphy.channel import receiver_rate
from cssphy.codec import tx_chain
from cssphy.demod import demod_many
from cssphy.framing import assemble_frame_iq
from cssphy.sync import sfo_reference_upchirp

P8 = make_params(8, 125_000, 1, 8)


def _frame_stream(params, payload_bits, cr=4, imp=ChannelImpairments(), tail=1):
    tx = tx_chain(payload_bits, params, cr)
    clean = assemble_frame_iq(tx, params)
    pad = np.zeros(tail * params.samples_per_symbol, dtype=np.complex128)
    clean = IqBuffer(np.concatenate([clean.samples, pad]), clean.rate)
    return tx, apply_channel(clean, imp, params)


# --- detection ---------------------------------------------------------------

def test_detect_clean_preamble_at_zero():
    _, stream = _frame_stream(P8, np.zeros(32, np.uint8))
    state = detect_preamble(stream, P8)
    assert state.detected
    assert state.s_pre_hat == 0
    assert state.frame_start == 0


@pytest.mark.parametrize("tau", [1, 17, 100])
def test_detect_reports_circular_shift_of_delay(tau):
    _, stream = _frame_stream(P8, np.zeros(32, np.uint8), imp=ChannelImpairments(delay_samples=tau))
    state = detect_preamble(stream, P8)
    assert state.detected
    assert state.s_pre_hat == 256 - tau


def test_detect_pure_noise_false_alarm():
    rng = np.random.default_rng(31)
    spb = P8.samples_per_symbol
    sigma = np.sqrt(10 ** 3.0 / 2)  # -30 dB SNR noise floor, no signal
    for _ in range(20):
        noise = sigma * (rng.standard_normal(50 * spb) + 1j * rng.standard_normal(50 * spb))
        state = detect_preamble(IqBuffer(noise, float(P8.fs)), P8, threshold=0.5 * 256)
        assert not state.detected


def test_detect_short_stream():
    state = detect_preamble(IqBuffer(np.zeros(100, complex), float(P8.fs)), P8)
    assert not state.detected


# --- synchronization ---------------------------------------------------------

def test_synchronize_clean_frame():
    bits = np.ones(128, np.uint8)
    _, stream = _frame_stream(P8, bits, imp=ChannelImpairments(delay_samples=300))
    state = detect_preamble(stream, P8)
    data_start = synchronize(stream, state, P8)
    assert data_start == 300 + int(12.25 * 256)


def test_synchronize_lands_at_cfo_time_offset():
    # 10 kHz at fs 125 kHz displaces the apparent timing by
    # round(0.08 * 256) = 20 samples, which the synchronizer keeps
    bits = np.ones(128, np.uint8)
    imp = ChannelImpairments(cfo_hz=10_000.0, delay_samples=300)
    _, stream = _frame_stream(P8, bits, imp=imp)
    state = detect_preamble(stream, P8)
    data_start = synchronize(stream, state, P8)
    assert data_start - (300 + int(12.25 * 256)) == 20


def test_synchronize_requires_detection():
    from cssphy.errors import SyncError
    from cssphy.sync import SyncState

    with pytest.raises(SyncError):
        synchronize(IqBuffer(np.zeros(4096, complex), float(P8.fs)), SyncState(False), P8)


# --- residual CFO estimation and compensation --------------------------------

def _preamble(params, imp=ChannelImpairments()):
    up = gen_upchirp(params).samples
    buf = IqBuffer(np.tile(up, params.n_pre), float(params.fs))
    return apply_channel(buf, imp, params)


def test_estimate_zero_offset():
    est = estimate_residual_cfo(_preamble(P8), P8)
    assert abs(est.delta_phi_hat) < 1e-9


@pytest.mark.parametrize("df", [100.0, -350.0, 211.5])
def test_estimate_recovers_small_offsets(df):
    # |df| below half a bin: no wrapping, the estimate maps straight back
    est = estimate_residual_cfo(_preamble(P8, ChannelImpairments(cfo_hz=df)), P8)
    expected = 2 * np.pi * df / 125_000 * 256
    assert est.delta_phi_hat == pytest.approx(expected, abs=1e-6)
    assert est.cfo_hz(P8) == pytest.approx(df, rel=1e-6)


def test_estimate_wraps_large_offsets():
    # 10 kHz: 20.48 bins; only the 0.48-bin fraction survives the wrap
    est = estimate_residual_cfo(_preamble(P8, ChannelImpairments(cfo_hz=10_000.0)), P8)
    assert est.delta_phi_hat == pytest.approx(2 * np.pi * 0.48, abs=1e-9)


def test_estimate_needs_two_upchirps():
    up = gen_upchirp(P8)
    with pytest.raises(ValueError):
        estimate_residual_cfo(up, P8)


def test_estimate_variance_shrinks_with_more_upchirps():
    rng_seeds = range(200)
    errs_2, errs_8 = [], []
    df = 150.0
    expected = 2 * np.pi * df / 125_000 * 256
    for seed in rng_seeds:
        imp = ChannelImpairments(cfo_hz=df, snr_db=0.0, seed=seed)
        pre = _preamble(P8, imp)
        two = IqBuffer(pre.samples[: 2 * 256], pre.rate)
        errs_2.append(estimate_residual_cfo(two, P8).delta_phi_hat - expected)
        errs_8.append(estimate_residual_cfo(pre, P8).delta_phi_hat - expected)
    assert np.var(errs_8) < np.var(errs_2) / 2


def test_compensation_is_unit_magnitude_and_cancels():
    from cssphy.sync import CfoEstimate

    rng = np.random.default_rng(5)
    y = IqBuffer(rng.standard_normal(512) + 1j * rng.standard_normal(512), float(P8.fs))
    out = compensate_cfo(y, CfoEstimate(1.234), P8)
    np.testing.assert_allclose(np.abs(out.samples), np.abs(y.samples), atol=1e-12)
    zero = compensate_cfo(y, CfoEstimate(0.0), P8)
    np.testing.assert_array_equal(zero.samples, y.samples)


def test_estimate_then_compensate_moves_tone_to_dc():
    df = 180.0
    rot = apply_cfo(IqBuffer(np.ones(2048, complex), float(P8.fs)), ChannelImpairments(cfo_hz=df), P8)
    est = estimate_residual_cfo(rot, P8)
    fixed = compensate_cfo(rot, est, P8)
    np.testing.assert_allclose(fixed.samples, np.ones(2048), atol=1e-6)


# --- SFO tracking and realignment ---------------------------------------------

def test_tracker_never_fires_without_offset():
    t = SfoTracker(bw=250_000.0, fs_rx=250_000.0, os=1)
    assert t.next_drift_sample() is None
    assert sfo_next_drift(t, 8) is None


@pytest.mark.parametrize("sfo,expect_d", [(5.0, 97), (10.0, 48)])
def test_first_drift_matches_brute_force(sfo, expect_d):
    fs_rx = 250_000.0 + sfo
    t = SfoTracker(bw=250_000.0, fs_rx=fs_rx, os=1)
    d, n = sfo_next_drift(t, 8)
    assert d == expect_d
    found = None
    for m in range(1, 100_000):
        dd, nn = divmod(m, 256)
        if (nn + 0.5 + dd * 256) / fs_rx < (nn + dd * 256) / 250_000.0:
            found = (dd, nn)
            break
    assert (d, n) == found


def test_doubling_offset_halves_first_drift():
    d5, _ = sfo_next_drift(SfoTracker(bw=250_000.0, fs_rx=250_005.0), 8)
    d10, _ = sfo_next_drift(SfoTracker(bw=250_000.0, fs_rx=250_010.0), 8)
    assert abs(d5 - 2 * d10) <= 1


def test_drift_points_increase_after_realignment():
    t = SfoTracker(bw=250_000.0, fs_rx=250_010.0)
    first = t.next_drift_sample()
    pts = t.drift_points(0, 100_000)
    assert pts[0] == first
    assert np.all(np.diff(pts) > 0)
    # spacing settles to one drop per full sample of drift
    assert np.all(np.abs(np.diff(pts) - 25_000) <= 1)


def test_realign_passthrough_without_offset():
    p = make_params(8, 250_000)
    rng = np.random.default_rng(6)
    x = rng.standard_normal(10 * 256) + 1j * rng.standard_normal(10 * 256)
    t = SfoTracker(bw=250_000.0, fs_rx=250_000.0)
    blocks = realign_stream(IqBuffer(x, 250_000.0), t, p, n_blocks=10)
    np.testing.assert_array_equal(blocks.reshape(-1), x)


def test_realign_recovers_long_frame():
    # 40 ppm, 200 symbols, twice-oversampled: drift-free after realignment
    p = make_params(8, 250_000, 2, 8)
    imp = ChannelImpairments(sfo_hz=10.0)
    rng = np.random.default_rng(7)
    syms = rng.integers(0, 256, 200)
    stream = synthesize_with_sfo(syms, p, imp)
    fs_rx = receiver_rate(p, imp)
    lead = (p.n_pre + 4) * p.samples_per_symbol + p.samples_per_symbol // 4
    tracker = SfoTracker(bw=p.bw, fs_rx=fs_rx, os=p.os)
    blocks = realign_stream(stream, tracker, p, n_blocks=200, start_sample=lead)
    got, _ = demod_many(blocks, p, reference=sfo_reference_upchirp(p, fs_rx))
    assert np.array_equal(got, syms)
    assert tracker.drops_done > 0


def test_no_realign_shows_drift_errors():
    p = make_params(8, 250_000, 1, 8)
    imp = ChannelImpairments(sfo_hz=10.0)
    rng = np.random.default_rng(7)
    syms = rng.integers(0, 256, 200)
    stream = synthesize_with_sfo(syms, p, imp)
    lead = (p.n_pre + 4) * 256 + 64
    blocks = np.asarray(stream.samples[lead: lead + 200 * 256]).reshape(200, 256)
    got, _ = demod_many(blocks, p, reference=sfo_reference_upchirp(p, receiver_rate(p, imp)))
    errors = np.nonzero(got != syms)[0]
    # boundary drift reaches half a sample near symbol 48 minus the 12.25
    # delimiter symbols already elapsed, then every symbol is off
    assert len(errors) > 150
    assert 30 <= errors[0] <= 44


def test_realign_raises_when_stream_too_short():
    p = make_params(8, 250_000)
    t = SfoTracker(bw=250_000.0, fs_rx=250_010.0)
    x = IqBuffer(np.zeros(100 * 256, complex), 250_010.0)
    with pytest.raises(ValueError):
        realign_stream(x, t, p, n_blocks=101)
