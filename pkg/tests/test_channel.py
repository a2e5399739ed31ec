import numpy as np
import pytest

from cssphy import (
    ChannelImpairments,
    IqBuffer,
    apply_awgn,
    apply_cfo,
    apply_channel,
    apply_delay,
    apply_fading,
    dechirp,
    demod_dft,
    gen_symbol,
    make_params,
    modulate_symbols,
    synthesize_with_sfo,
)
from cssphy.channel import receiver_rate, sfo_dechirp_tone_cycles, sfo_peak_bin_prediction
from cssphy.framing import assemble_frame_iq
from cssphy.sync import sfo_reference_upchirp


def test_awgn_neutral_and_deterministic():
    p = make_params(8, 125_000)
    y = gen_symbol(3, p)
    out = apply_awgn(y, ChannelImpairments())  # snr = inf
    np.testing.assert_array_equal(out.samples, y.samples)
    imp = ChannelImpairments(snr_db=0.0, seed=42)
    a = apply_awgn(y, imp)
    b = apply_awgn(y, imp)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, y.samples)


def test_awgn_statistics():
    imp = ChannelImpairments(snr_db=-3.0, seed=9)
    var = imp.noise_variance
    z = apply_awgn(IqBuffer(np.zeros(10**6, complex), 1.0), imp).samples
    measured = np.mean(np.abs(z) ** 2)
    assert abs(measured - var) / var < 0.01
    assert abs(np.mean(z)) < 3 * np.sqrt(var / 10**6)
    # whiteness: autocorrelation at nonzero lags within the 3-sigma band
    for lag in (1, 2, 5, 17):
        r = np.mean(z[:-lag] * np.conj(z[lag:]))
        assert abs(r) < 3 * var / np.sqrt(10**6 - lag)


def test_fading():
    p = make_params(8, 125_000)
    y = gen_symbol(9, p)
    np.testing.assert_array_equal(apply_fading(y, ChannelImpairments()).samples, y.samples)
    with pytest.raises(ValueError):
        apply_fading(y, ChannelImpairments(h=0))
    base = demod_dft(y, p)
    for h in (0.2, 5.0 - 3.3j, np.exp(1j * 0.7)):
        faded = apply_fading(y, ChannelImpairments(h=h))
        r = demod_dft(IqBuffer(faded.samples, y.rate), p)
        assert r.symbol == base.symbol
    rot = apply_fading(y, ChannelImpairments(h=np.exp(1j * 0.7)))
    r = demod_dft(IqBuffer(rot.samples, y.rate), p)
    np.testing.assert_allclose(r.magnitudes, base.magnitudes, atol=1e-9)


def test_cfo_identity_and_tone():
    p = make_params(8, 125_000)
    y = gen_symbol(37, p)
    np.testing.assert_array_equal(apply_cfo(y, ChannelImpairments(), p).samples, y.samples)
    # rotated then dechirped: pure tone at s/2^sf - cfo/fs (os = 1)
    df = 3000.0
    shifted = apply_cfo(y, ChannelImpairments(cfo_hz=df), p)
    out = dechirp(shifted, p).samples
    n = np.arange(256)
    model = np.exp(2j * np.pi * n * (37 / 256 - df / 125_000))
    assert np.max(np.abs(out - model)) < 1e-9


def test_cfo_above_half_bin_breaks_aligned_decision():
    p = make_params(8, 125_000)
    half_bin_hz = p.bw / (2 * p.chips_per_symbol)
    for s in (10, 100, 250):
        y = apply_cfo(gen_symbol(s, p), ChannelImpairments(cfo_hz=1.02 * half_bin_hz), p)
        assert demod_dft(y, p).symbol != s
        y = apply_cfo(gen_symbol(s, p), ChannelImpairments(cfo_hz=0.98 * half_bin_hz), p)
        assert demod_dft(y, p).symbol == s


def test_delay():
    p = make_params(8, 125_000)
    y = gen_symbol(1, p)
    np.testing.assert_array_equal(apply_delay(y, ChannelImpairments()).samples, y.samples)
    out = apply_delay(y, ChannelImpairments(delay_samples=17))
    assert len(out) == len(y) + 17
    assert not out.samples[:17].any()
    with pytest.raises(ValueError):
        apply_delay(y, ChannelImpairments(delay_samples=-1))


def test_neutral_composition_is_identity():
    p = make_params(8, 125_000)
    y = modulate_symbols([5, 250, 0], p)
    out = apply_channel(y, ChannelImpairments(), p)
    np.testing.assert_array_equal(out.samples, y.samples)


def test_sfo_zero_matches_modulation_path():
    rng = np.random.default_rng(3)
    for os_fac in (1, 2):
        p = make_params(8, 250_000, os_fac, 8)
        syms = rng.integers(0, 256, 30)
        a = synthesize_with_sfo(syms, p, ChannelImpairments())
        b = assemble_frame_iq(syms, p)
        assert a.rate == float(p.fs)
        assert len(a) == len(b)
        np.testing.assert_allclose(a.samples, b.samples, atol=1e-12)


def test_sfo_synthesis_without_delimiters():
    p = make_params(8, 250_000)
    syms = [1, 2, 3]
    out = synthesize_with_sfo(syms, p, ChannelImpairments(), include_delimiters=False)
    np.testing.assert_allclose(out.samples, modulate_symbols(syms, p).samples, atol=1e-12)


def test_sfo_dechirped_phase_matches_tone_model():
    # dechirped symbol d is a pure tone at the predicted frequency on the
    # leakage-free samples, separately before and after the fold
    p = make_params(8, 250_000)
    imp = ChannelImpairments(sfo_hz=10.0)
    rng = np.random.default_rng(8)
    syms = rng.integers(0, 256, 48)
    stream = synthesize_with_sfo(syms, p, imp, include_delimiters=False)
    fs_rx = receiver_rate(p, imp)
    ref = sfo_reference_upchirp(p, fs_rx)
    n_chips = 256
    worst = 0.0
    for d in (0, 3, 17, 30, 47):
        block = stream.samples[d * n_chips: (d + 1) * n_chips]
        dc = block * np.conj(ref)
        s = int(syms[d])
        pre, post = sfo_dechirp_tone_cycles(s, d, p, imp)
        delta_t = d * (n_chips / fs_rx - n_chips / p.bw)
        lo = max(int(np.floor(-delta_t * fs_rx)) + 1, 0)
        hi = min(int(np.ceil((n_chips / p.bw - delta_t) * fs_rx)) - 1, n_chips)
        n = np.arange(lo, hi)
        fold = (n_chips - s) * fs_rx / p.bw
        for coef, idx in ((pre, n[n < fold]), (post, n[n >= fold])):
            if len(idx) < 4:
                continue
            resid = dc[idx] * np.exp(-2j * np.pi * coef * idx)
            resid *= np.conj(resid.mean() / abs(resid.mean()))
            worst = max(worst, float(np.max(np.abs(np.angle(resid)))))
    assert worst < 1e-6


def test_sfo_peak_follows_prediction_until_first_drift():
    p = make_params(8, 250_000)
    imp = ChannelImpairments(sfo_hz=10.0)
    rng = np.random.default_rng(9)
    syms = rng.integers(0, 256, 48)  # first drift is at symbol 48
    stream = synthesize_with_sfo(syms, p, imp, include_delimiters=False)
    ref = sfo_reference_upchirp(p, receiver_rate(p, imp))
    for d in range(48):
        block = stream.samples[d * 256: (d + 1) * 256]
        peak = int(np.argmax(np.abs(np.fft.fft(block * np.conj(ref)))))
        predicted = int(np.round(sfo_peak_bin_prediction(int(syms[d]), d, p, imp))) % 256
        assert peak == predicted, (d, peak, predicted)


def test_trial_substreams_are_stable():
    from cssphy.channel import trial_impairments

    imp = ChannelImpairments(snr_db=5.0)
    a = trial_impairments(imp, 1234, 7)
    b = trial_impairments(imp, 1234, 7)
    assert a == b
    assert a.seed != trial_impairments(imp, 1234, 8).seed
