import numpy as np
import pytest

from cssphy import (
    IqBuffer,
    dechirp,
    demod_dft,
    demod_matched_filter,
    gen_symbol,
    gen_upchirp,
    make_params,
    modulate_symbols,
)


def _noisy(buf, snr_db, rng):
    sigma = np.sqrt(10 ** (-snr_db / 10) / 2)
    n = sigma * (rng.standard_normal(len(buf.samples)) + 1j * rng.standard_normal(len(buf.samples)))
    return IqBuffer(buf.samples + n, buf.rate)


def test_dechirp_of_upchirp_is_ones():
    p = make_params(8, 125_000, 2)
    out = dechirp(gen_upchirp(p), p)
    np.testing.assert_allclose(out.samples, np.ones(512), atol=1e-12)


def test_dechirp_of_zeros_is_zeros():
    p = make_params(7, 125_000)
    out = dechirp(IqBuffer(np.zeros(128, complex), float(p.fs)), p)
    np.testing.assert_array_equal(out.samples, np.zeros(128))


def test_dechirp_gives_pure_tone_at_os1():
    p = make_params(7, 125_000)
    s = 37
    out = dechirp(gen_symbol(s, p), p).samples
    tone = np.exp(2j * np.pi * np.arange(128) * s / 128)
    np.testing.assert_allclose(out, tone, atol=1e-10)


def test_dechirp_rejects_wrong_length():
    p = make_params(7, 125_000)
    with pytest.raises(ValueError):
        dechirp(IqBuffer(np.ones(100, complex), float(p.fs)), p)


def test_noiseless_decision_and_peak():
    p = make_params(8, 125_000)
    r = demod_dft(gen_symbol(42, p), p)
    assert r.symbol == 42
    assert r.peak_magnitude == pytest.approx(256, abs=1e-9)
    others = np.delete(r.magnitudes, 42)
    assert np.max(others) < 1e-9
    assert len(r.magnitudes) == 256


def test_matched_filter_noiseless():
    p = make_params(7, 125_000)
    r = demod_matched_filter(gen_symbol(99, p), p)
    assert r.symbol == 99
    assert r.peak_magnitude == pytest.approx(128, abs=1e-9)
    assert np.max(np.delete(r.magnitudes, 99)) < 1e-9


def test_forms_agree_on_noisy_buffers():
    p = make_params(8, 125_000)
    rng = np.random.default_rng(11)
    for snr in (-10, 0, 10):
        for _ in range(50):
            s = int(rng.integers(256))
            y = _noisy(gen_symbol(s, p), snr, rng)
            a = demod_dft(y, p)
            b = demod_matched_filter(y, p)
            assert a.symbol == b.symbol
            scale = np.max(b.magnitudes)
            assert np.max(np.abs(a.magnitudes - b.magnitudes)) / scale < 1e-6


def test_scale_invariance_of_decision():
    p = make_params(8, 125_000)
    rng = np.random.default_rng(12)
    y = _noisy(gen_symbol(7, p), 0, rng)
    base = demod_dft(y, p).symbol
    for h in (0.01, 3.7, -2.0 + 1.1j, 1j):
        scaled = IqBuffer(y.samples * h, y.rate)
        assert demod_dft(scaled, p).symbol == base


def test_oversampled_roundtrip_and_peak():
    p = make_params(8, 125_000, 2)
    for s in (0, 5, 128, 255):
        r = demod_dft(gen_symbol(s, p), p)
        assert r.symbol == s
        # aliased halves sum to the full sample count
        assert r.peak_magnitude == pytest.approx(512, rel=1e-9)


def test_exhaustive_roundtrip_small_sf():
    p = make_params(6, 500_000)
    buf = modulate_symbols(range(64), p)
    blocks = buf.samples.reshape(64, 64)
    from cssphy.demod import demod_many

    got, _ = demod_many(blocks, p)
    np.testing.assert_array_equal(got, np.arange(64))
