import numpy as np
import pytest

from cssphy import gen_downchirp, gen_symbol, gen_upchirp, make_params, modulate_symbols


def test_symbol_zero_first_sample_is_one():
    p = make_params(8, 125_000)
    buf = gen_symbol(0, p)
    assert buf.samples[0] == pytest.approx(1 + 0j)
    assert len(buf) == 256
    assert buf.rate == 125_000.0


def test_known_phase_value():
    # sf=7, os=1, symbol 1: sample 1 carries phase 2*pi*(1/256 + 1/128 - 1/2)
    p = make_params(7, 125_000)
    buf = gen_symbol(1, p)
    expected = np.exp(2j * np.pi * (1 / 256 + 1 / 128 - 1 / 2))
    assert buf.samples[1] == pytest.approx(expected, abs=1e-12)


def test_unit_modulus_everywhere():
    for sf, os in ((6, 1), (8, 1), (8, 2), (10, 4)):
        p = make_params(sf, 250_000, os)
        for s in (0, 1, (1 << sf) // 2, (1 << sf) - 1):
            mags = np.abs(gen_symbol(s, p).samples)
            assert np.max(np.abs(mags - 1.0)) < 1e-12


def test_sample_count_at_oversampling():
    p = make_params(9, 500_000, 3)
    assert len(gen_symbol(5, p)) == 3 * 512


def test_rejects_out_of_range_symbol():
    p = make_params(7, 125_000)
    with pytest.raises(ValueError):
        gen_symbol(128, p)
    with pytest.raises(ValueError):
        gen_symbol(-1, p)


def test_upchirp_equals_symbol_zero_and_conjugates():
    p = make_params(8, 125_000, 2)
    up = gen_upchirp(p).samples
    down = gen_downchirp(p).samples
    np.testing.assert_array_equal(up, gen_symbol(0, p).samples)
    np.testing.assert_allclose(up * down, np.ones(len(up)), atol=1e-12)
    assert down[0] == pytest.approx(1 + 0j)


def test_orthogonality_at_os1():
    p = make_params(7, 125_000)
    n = p.chips_per_symbol
    bank = np.stack([gen_symbol(s, p).samples for s in range(n)])
    gram = bank @ bank.conj().T
    off_diag = gram - np.diag(np.diag(gram))
    assert np.max(np.abs(off_diag)) < 1e-9
    assert np.max(np.abs(np.diag(gram) - n)) < 1e-9


@pytest.mark.parametrize("sf,os,s", [(7, 1, 64), (8, 2, 100), (8, 4, 3)])
def test_frequency_fold_position(sf, os, s):
    # instantaneous frequency must wrap from +bw/2 to -bw/2 exactly once,
    # at sample index os*(2^sf - s)
    bw = 125_000
    p = make_params(sf, bw, os)
    x = gen_symbol(s, p).samples
    inst = np.angle(x[1:] * np.conj(x[:-1])) * p.fs / (2 * np.pi)
    drops = np.nonzero(np.diff(inst) < -bw / 2)[0]
    n_fold = os * ((1 << sf) - s)
    assert len(drops) == 1
    # the wrap lands on the increment spanning the fold sample
    assert drops[0] in (n_fold - 2, n_fold - 1)


def test_no_fold_for_symbol_zero():
    p = make_params(8, 125_000, 2)
    x = gen_symbol(0, p).samples
    inst = np.angle(x[1:] * np.conj(x[:-1]))
    assert np.all(np.diff(inst) > -np.pi / 2)


def test_modulate_symbols_concatenation():
    p = make_params(8, 125_000, 2)
    assert len(modulate_symbols([], p)) == 0
    one = modulate_symbols([17], p)
    np.testing.assert_allclose(one.samples, gen_symbol(17, p).samples, atol=1e-12)
    many = modulate_symbols([17, 0, 255], p)
    assert len(many) == 3 * p.samples_per_symbol
    np.testing.assert_allclose(many.samples[:512], gen_symbol(17, p).samples, atol=1e-12)
    with pytest.raises(ValueError):
        modulate_symbols([0, 256], p)
