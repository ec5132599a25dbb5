import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import SR, harmonic, tone, wave
from oracles import direct_dft_power
from vowelseg import dsp
from vowelseg.dsp import (EPS_FLOOR, PowerSpectrumFrame, band_energy, frame_signal,
                          mfcc_sequence, pitch_track, power_spectrogram, stft_frame,
                          wiener_entropy, zero_crossings)
from vowelseg.errors import SignalTooShortError


# -- framing ------------------------------------------------------------------

@pytest.mark.parametrize("seconds, T", [(1.0, 196), (0.025, 1), (0.030, 2), (0.5, 96)])
def test_frame_count(seconds, T):
    assert frame_signal(wave(np.zeros(int(round(seconds * SR))))).num_frames == T


def test_below_one_window_is_too_short():
    with pytest.raises(SignalTooShortError, match="too short"):
        frame_signal(wave(np.zeros(int(0.024 * SR))))


@given(st.integers(400, 20000))
def test_frame_count_law(n):
    assert frame_signal(wave(np.zeros(n))).num_frames == (n - 400) // 80 + 1


def test_grid_geometry():
    g = frame_signal(wave(np.zeros(SR)))
    assert (g.hop_length, g.win_length, g.nfft) == (80, 400, 512)
    assert g.frame_start(1) == 0 and g.frame_start(3) == 160
    assert g.bin_width == pytest.approx(SR / 512)
    for bad in (0, g.num_frames + 1):
        with pytest.raises(IndexError):
            g.frame_start(bad)


@pytest.mark.parametrize("bad", [np.array([]), np.zeros((2, 2)), np.array([0.0, np.nan]),
                                 np.array([0.0, 1.5])])
def test_waveform_validation(bad):
    with pytest.raises(ValueError):
        wave(bad)


def test_waveform_rejects_low_rate():
    with pytest.raises(ValueError):
        dsp.Waveform(np.zeros(10), 4000)


# -- spectra ------------------------------------------------------------------

def test_sine_peak_at_its_frequency():
    w = wave(tone(1000, 0.1))
    g = frame_signal(w)
    p = stft_frame(w, g, 3)
    assert abs(np.argmax(p.bins) * p.bin_width - 1000) <= p.bin_width


def test_zero_frame_has_zero_power():
    w = wave(np.zeros(800))
    p = stft_frame(w, frame_signal(w), 1)
    assert np.all(p.bins == 0)


def test_stft_out_of_range():
    w = wave(np.zeros(800))
    g = frame_signal(w)
    with pytest.raises(IndexError):
        stft_frame(w, g, 0)
    with pytest.raises(IndexError):
        stft_frame(w, g, g.num_frames + 1)


def test_power_matches_direct_dft(rng):
    # one-sided: interior bins double, DC and Nyquist single, all over nfft
    w = wave(rng.uniform(-0.5, 0.5, 1200))
    g = frame_signal(w)
    t = 4
    frame = w.samples[g.frame_start(t):g.frame_start(t) + 400] * np.hamming(400)
    ref = direct_dft_power(frame, 512) / 512
    ref[1:-1] *= 2
    np.testing.assert_allclose(stft_frame(w, g, t).bins, ref, rtol=1e-9, atol=1e-15)
    np.testing.assert_allclose(power_spectrogram(w, g)[t - 1], ref, rtol=1e-9, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 400, elements=st.floats(-1, 1)))
def test_parseval(x):
    w = wave(x)
    p = stft_frame(w, frame_signal(w), 1)
    energy = float(np.sum((x * np.hamming(400)) ** 2))
    assert math.isclose(p.bins.sum(), energy, rel_tol=1e-6, abs_tol=1e-12)


def test_white_noise_parseval(rng):
    x = rng.uniform(-0.5, 0.5, 4000)
    w = wave(x)
    g = frame_signal(w)
    P = power_spectrogram(w, g)
    frames = dsp.frame_matrix(w, g) * np.hamming(400)
    np.testing.assert_allclose(P.sum(axis=1), (frames ** 2).sum(axis=1), rtol=1e-6)


# -- band energy ---------------------------------------------------------------

def _frame(bins):
    return PowerSpectrumFrame(np.asarray(bins, dtype=np.float64), SR / 512)


def test_band_energy_of_silence():
    p = _frame(np.zeros(257))
    for lo, hi in [(20, 300), (3000, 8000), (0, 8000)]:
        assert band_energy(p, lo, hi) == math.log(EPS_FLOOR)


def test_band_energy_full_band_is_total(rng):
    p = _frame(rng.random(257))
    assert math.isclose(band_energy(p, 0, 8000), math.log(EPS_FLOOR + p.bins.sum()), rel_tol=1e-9)


def test_band_energy_matches_direct_bin_sum(rng):
    p = _frame(rng.random(257))
    freqs = np.arange(257) * SR / 512
    sel = (freqs >= 20) & (freqs <= 300)
    assert band_energy(p, 20, 300) == pytest.approx(math.log(EPS_FLOOR + p.bins[sel].sum()), abs=1e-12)


def test_low_tone_low_band_dominates():
    """A 100 Hz tone puts far more energy in 20-300 Hz than above 3 kHz.

    The gap is bounded by the Hamming window's spectral leakage; the value
    below was computed with an explicit DFT of the same windowed frames.
    """
    w = wave(tone(100, 0.2))
    g = frame_signal(w)
    for t in (1, 10, g.num_frames):
        frame = w.samples[g.frame_start(t):g.frame_start(t) + 400] * np.hamming(400)
        ref = direct_dft_power(frame, 512) / 512
        ref[1:-1] *= 2
        f = np.arange(257) * SR / 512
        low = math.log(EPS_FLOOR + ref[(f >= 20) & (f <= 300)].sum())
        high = math.log(EPS_FLOOR + ref[f >= 3000].sum())
        p = stft_frame(w, g, t)
        gap = band_energy(p, 20, 300) - band_energy(p, 3000, 8000)
        assert gap == pytest.approx(low - high, abs=1e-9)
        assert gap == pytest.approx(17.44, abs=0.05)


@pytest.mark.xfail(strict=True, reason="Hamming sidelobe leakage caps the 100 Hz tone's "
                   "low/high band gap near 17.4 nats")
def test_low_band_gap_reaches_20_nats():
    w = wave(tone(100, 0.2))
    p = stft_frame(w, frame_signal(w), 10)
    assert band_energy(p, 20, 300) - band_energy(p, 3000, 8000) >= 20


@pytest.mark.parametrize("lo, hi", [(300, 20), (-1, 100), (0, 9000), (50, 50)])
def test_band_energy_rejects_invalid_band(lo, hi):
    with pytest.raises(ValueError):
        band_energy(_frame(np.ones(257)), lo, hi)


# -- Wiener entropy -------------------------------------------------------------

def test_wiener_entropy_flat_is_zero():
    assert wiener_entropy(_frame(np.full(257, 3.0))) == pytest.approx(0.0, abs=1e-12)


def test_wiener_entropy_spike():
    n, spike = 257, 1.0
    bins = np.zeros(n)
    bins[40] = spike
    # closed form: mean log minus log mean of the floored bins
    expected = ((n - 1) * math.log(EPS_FLOOR) + math.log(spike + EPS_FLOOR)) / n \
        - math.log((spike + n * EPS_FLOOR) / n)
    value = wiener_entropy(_frame(bins))
    assert value == pytest.approx(expected, abs=1e-9)
    assert value <= -5


@given(arrays(np.float64, 257, elements=st.floats(0, 1e6)))
def test_wiener_entropy_nonpositive(bins):
    assert wiener_entropy(_frame(bins)) <= 1e-12


# -- MFCC -------------------------------------------------------------------------

def test_mfcc_shape_and_stationary_tone():
    w = wave(tone(1000, 0.3))   # five periods per hop: every frame identical
    g = frame_signal(w)
    m = mfcc_sequence(w, g)
    assert m.shape == (g.num_frames, 39)
    interior = m[3:-3]
    np.testing.assert_allclose(interior[:, :13], np.tile(interior[0, :13], (len(interior), 1)), atol=1e-6)
    np.testing.assert_allclose(interior[:, 13:], 0.0, atol=1e-6)


def test_mfcc_c0_is_log_energy(rng):
    w = wave(rng.uniform(-0.3, 0.3, 3000))
    g = frame_signal(w)
    P = power_spectrogram(w, g)
    np.testing.assert_allclose(mfcc_sequence(w, g)[:, 0], np.log(EPS_FLOOR + P.sum(axis=1)))


def test_mfcc_distance_peaks_at_tone_change():
    change = 8000
    x = np.concatenate([tone(300, change / SR), tone(2500, 0.5)])
    w = wave(x)
    g = frame_signal(w)
    m = mfcc_sequence(w, g)[:, :13]
    dist = np.linalg.norm(np.diff(m, axis=0), axis=1)     # between t and t+1
    peak = int(np.argmax(dist)) + 2                        # 1-based later frame
    centre_frame = (change - 200) / 80 + 1                 # window centred on the change
    assert abs(peak - centre_frame) <= 2


def test_deltas_of_ramp():
    T = 12
    ramp = np.arange(T, dtype=float)[:, None] * 0.5
    d = dsp.deltas(ramp)
    np.testing.assert_allclose(d[2:-2, 0], 0.5)
    # edge replication: first frame sees [0, 0, 0, 0.5, 1.0]
    assert d[0, 0] == pytest.approx((1 * (0.5 - 0) + 2 * (1.0 - 0)) / 10)


def test_mel_filterbank_shape():
    bank = dsp.mel_filterbank(26, 512, SR)
    assert bank.shape == (26, 257)
    assert np.all(bank >= 0) and np.all(bank.max(axis=1) > 0)


# -- pitch ------------------------------------------------------------------------

def test_pitch_on_150hz_vowel():
    w = wave(harmonic(150, 0.3))
    g = frame_signal(w)
    f0, voiced = pitch_track(w, g)
    inner = slice(2, g.num_frames - 2)
    assert voiced[inner].all()
    assert np.all(np.abs(f0[inner] - 150) <= 5)


def test_pitch_on_noise(rng):
    w = wave(rng.uniform(-0.5, 0.5, 8000))
    f0, voiced = pitch_track(w, frame_signal(w))
    assert voiced.mean() <= 0.10
    assert np.all(f0[voiced == 0] == 0)


def test_pitch_on_silence():
    w = wave(np.zeros(8000))
    f0, voiced = pitch_track(w, frame_signal(w))
    assert not voiced.any() and not f0.any()


@pytest.mark.parametrize("f", [100.0, 220.0, 330.0])
def test_pitch_range(f):
    w = wave(harmonic(f, 0.25))
    f0, voiced = pitch_track(w, frame_signal(w))
    assert voiced[3:-3].all() and np.all(np.abs(f0[3:-3] - f) <= 5)


# -- zero crossings -----------------------------------------------------------------

def test_zero_crossings_1khz():
    w = wave(tone(1000, 0.1, phase=0.3))
    g = frame_signal(w)
    for t in (1, 5, g.num_frames):
        assert abs(zero_crossings(w, g, t) - 10) <= 1


def test_zero_crossings_dc():
    w = wave(np.full(1600, 0.25))
    g = frame_signal(w)
    assert all(zero_crossings(w, g, t) == 0 for t in range(1, g.num_frames + 1))


def test_zero_crossings_noise(rng):
    w = wave(rng.uniform(-0.5, 0.5, 8000))
    g = frame_signal(w)
    counts = dsp.zero_crossing_counts(w, g)
    assert abs(counts.mean() - 40) <= 0.3 * 40


def test_zero_crossings_index():
    w = wave(np.zeros(800))
    with pytest.raises(IndexError):
        zero_crossings(w, frame_signal(w), 0)


def test_zero_crossings_against_direct_count(rng):
    w = wave(rng.uniform(-0.5, 0.5, 2000))
    g = frame_signal(w)
    x = w.samples
    for t in range(1, g.num_frames + 1):
        c = g.frame_start(t) + 200
        seg = x[c - 40:c + 40]
        direct = sum(1 for i in range(79) if (seg[i] < 0) != (seg[i + 1] < 0))
        assert zero_crossings(w, g, t) == direct


# -- determinism ------------------------------------------------------------------------

def test_bit_identical_reruns(rng):
    x = rng.uniform(-0.5, 0.5, 5000)
    a = [power_spectrogram(wave(x), frame_signal(wave(x))), *pitch_track(wave(x), frame_signal(wave(x)))]
    b = [power_spectrogram(wave(x), frame_signal(wave(x))), *pitch_track(wave(x), frame_signal(wave(x)))]
    for u, v in zip(a, b):
        assert np.array_equal(u, v)
