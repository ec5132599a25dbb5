"""Short-time signal processing used by the acoustic front end.

Everything here is a pure function of a :class:`Waveform` and a
:class:`FrameGrid`.  Frames are 1-indexed in the public API (frame ``t``
starts at sample ``(t - 1) * hop``); arrays returned for a whole utterance
are ordinary 0-indexed numpy arrays of length ``T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import dct

from .errors import SignalTooShortError

EPS_FLOOR = 1e-10

PITCH_FMIN = 60.0
PITCH_FMAX = 400.0
VOICING_THRESHOLD = 0.45

N_MEL_FILTERS = 26
N_CEPSTRA = 13
DELTA_WIDTH = 2


@dataclass(frozen=True)
class Waveform:
    """Mono signal with amplitudes in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("waveform must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        if np.max(np.abs(samples)) > 1.0 + 1e-9:
            raise ValueError("waveform amplitudes must lie in [-1, 1]")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate < 8000:
            raise ValueError("sample_rate must be an integer >= 8000 Hz")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class FrameGrid:
    hop: float
    window: float
    num_frames: int
    sample_rate: int

    @property
    def hop_length(self) -> int:
        return int(round(self.hop * self.sample_rate))

    @property
    def win_length(self) -> int:
        return int(round(self.window * self.sample_rate))

    @property
    def nfft(self) -> int:
        return 1 << (self.win_length - 1).bit_length()

    @property
    def bin_width(self) -> float:
        return self.sample_rate / self.nfft

    def frame_start(self, t: int) -> int:
        """First sample of 1-indexed frame ``t``."""
        self._check(t)
        return (t - 1) * self.hop_length

    def frame_center(self, t: int) -> int:
        return self.frame_start(t) + self.win_length // 2

    def _check(self, t: int) -> None:
        if not 1 <= t <= self.num_frames:
            raise IndexError(f"frame {t} outside 1..{self.num_frames}")


@dataclass(frozen=True)
class PowerSpectrumFrame:
    """One-sided power spectrum, scaled so that the bins sum to the
    windowed frame energy."""

    bins: np.ndarray
    bin_width: float

    @property
    def nyquist(self) -> float:
        return (self.bins.size - 1) * self.bin_width


def frame_signal(w: Waveform, hop: float = 0.005, window: float = 0.025) -> FrameGrid:
    hop_len = int(round(hop * w.sample_rate))
    win_len = int(round(window * w.sample_rate))
    if hop_len < 1 or win_len < 1:
        raise ValueError("hop and window must span at least one sample")
    n = w.samples.size
    if n < win_len:
        raise SignalTooShortError(
            f"signal too short: {n} samples, one window needs {win_len}")
    num_frames = (n - win_len) // hop_len + 1
    return FrameGrid(hop=hop, window=window, num_frames=num_frames,
                     sample_rate=w.sample_rate)


def frame_matrix(w: Waveform, grid: FrameGrid) -> np.ndarray:
    """T x win_length view of the (unwindowed) frames."""
    view = sliding_window_view(w.samples, grid.win_length)
    return view[::grid.hop_length][:grid.num_frames]


def analysis_window(grid: FrameGrid) -> np.ndarray:
    return np.hamming(grid.win_length)


def power_spectrogram(w: Waveform, grid: FrameGrid) -> np.ndarray:
    """T x (nfft/2 + 1) matrix of one-sided Hamming-windowed power.

    Interior bins carry both the positive and negative frequency halves, so
    each row sums to the energy of the windowed frame (Parseval).
    """
    frames = frame_matrix(w, grid) * analysis_window(grid)
    nfft = grid.nfft
    spec = np.fft.rfft(frames, n=nfft, axis=1)
    power = (spec.real ** 2 + spec.imag ** 2) / nfft
    power[:, 1:-1] *= 2.0
    return power


def stft_frame(w: Waveform, grid: FrameGrid, t: int) -> PowerSpectrumFrame:
    grid._check(t)
    start = grid.frame_start(t)
    frame = w.samples[start:start + grid.win_length] * analysis_window(grid)
    spec = np.fft.rfft(frame, n=grid.nfft)
    power = (spec.real ** 2 + spec.imag ** 2) / grid.nfft
    power[1:-1] *= 2.0
    return PowerSpectrumFrame(bins=power, bin_width=grid.bin_width)


def _band_mask(n_bins: int, bin_width: float, lo: float, hi: float) -> np.ndarray:
    nyquist = (n_bins - 1) * bin_width
    if not (0.0 <= lo < hi <= nyquist + 1e-9):
        raise ValueError(f"invalid band [{lo}, {hi}] for Nyquist {nyquist}")
    freqs = np.arange(n_bins) * bin_width
    return (freqs >= lo) & (freqs <= hi)


def band_energy(p: PowerSpectrumFrame, lo: float, hi: float) -> float:
    """Natural log of the power in ``[lo, hi]`` Hz (inclusive)."""
    mask = _band_mask(p.bins.size, p.bin_width, lo, hi)
    return float(np.log(EPS_FLOOR + p.bins[mask].sum()))


def band_energies(power: np.ndarray, bin_width: float, lo: float, hi: float) -> np.ndarray:
    mask = _band_mask(power.shape[1], bin_width, lo, hi)
    return np.log(EPS_FLOOR + power[:, mask].sum(axis=1))


def wiener_entropy(p: PowerSpectrumFrame) -> float:
    return float(wiener_entropies(p.bins[None, :])[0])


def wiener_entropies(power: np.ndarray) -> np.ndarray:
    floored = power + EPS_FLOOR
    log_gm = np.mean(np.log(floored), axis=1)
    log_am = np.log(np.mean(floored, axis=1))
    # AM-GM guarantees <= 0; rounding can leave a few ulps above.
    return np.minimum(log_gm - log_am, 0.0)


def mel_filterbank(n_filters: int, nfft: int, sample_rate: int,
                   fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Triangular filters on the HTK mel scale, shape (n_filters, nfft/2+1)."""
    if fmax is None:
        fmax = sample_rate / 2.0

    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)

    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_filters + 2))
    freqs = np.arange(nfft // 2 + 1) * sample_rate / nfft
    bank = np.zeros((n_filters, freqs.size))
    for i in range(n_filters):
        left, center, right = edges[i], edges[i + 1], edges[i + 2]
        up = (freqs - left) / (center - left)
        down = (right - freqs) / (right - center)
        bank[i] = np.maximum(0.0, np.minimum(up, down))
    return bank


def deltas(features: np.ndarray, width: int = DELTA_WIDTH) -> np.ndarray:
    """Regression deltas over +-``width`` frames with edge replication."""
    T = features.shape[0]
    padded = np.pad(features, ((width, width), (0, 0)), mode="edge")
    num = np.zeros_like(features)
    for n in range(1, width + 1):
        num += n * (padded[width + n:width + n + T] - padded[width - n:width - n + T])
    return num / (2.0 * sum(n * n for n in range(1, width + 1)))


def mfcc_sequence(w: Waveform, grid: FrameGrid, power: np.ndarray | None = None) -> np.ndarray:
    """T x 39 MFCC matrix: 13 statics (C0 replaced by log frame energy),
    deltas and delta-deltas."""
    if power is None:
        power = power_spectrogram(w, grid)
    bank = mel_filterbank(N_MEL_FILTERS, grid.nfft, grid.sample_rate)
    log_mel = np.log(EPS_FLOOR + power @ bank.T)
    static = dct(log_mel, type=2, norm="ortho", axis=1)[:, :N_CEPSTRA]
    static[:, 0] = np.log(EPS_FLOOR + power.sum(axis=1))
    d1 = deltas(static)
    d2 = deltas(d1)
    return np.hstack([static, d1, d2])


def pitch_track(w: Waveform, grid: FrameGrid) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame ``(f0, voiced)`` from the normalized cross-correlation.

    For every frame the first ``win_length`` samples are correlated against
    the same signal shifted by lags spanning 60-400 Hz.  A frame is voiced
    when the best peak reaches :data:`VOICING_THRESHOLD`; f0 is 0 otherwise.
    """
    sr = grid.sample_rate
    W = grid.win_length
    lag_min = int(np.floor(sr / PITCH_FMAX))
    lag_max = int(np.ceil(sr / PITCH_FMIN))
    L = W + lag_max + 1

    padded = np.concatenate([w.samples, np.zeros(L)])
    starts = np.arange(grid.num_frames) * grid.hop_length
    segs = sliding_window_view(padded, L)[starts]

    nfft = 1 << (L + W - 1).bit_length()
    head = np.zeros_like(segs)
    head[:, :W] = segs[:, :W]
    cross = np.fft.irfft(np.conj(np.fft.rfft(head, n=nfft, axis=1))
                         * np.fft.rfft(segs, n=nfft, axis=1), n=nfft, axis=1)
    cross = cross[:, :lag_max + 2]

    csum = np.concatenate([np.zeros((segs.shape[0], 1)), np.cumsum(segs ** 2, axis=1)], axis=1)
    lags = np.arange(lag_max + 2)
    e0 = csum[:, W]
    ek = csum[:, lags + W] - csum[:, lags]
    denom = np.sqrt(e0[:, None] * ek)
    energy_floor = W * 1e-12
    with np.errstate(invalid="ignore", divide="ignore"):
        nccf = np.where((denom > energy_floor) & (ek > energy_floor), cross / denom, 0.0)

    f0 = np.zeros(grid.num_frames)
    voiced = np.zeros(grid.num_frames, dtype=np.int64)
    for i in range(grid.num_frames):
        if e0[i] <= energy_floor:
            continue
        r = nccf[i]
        band = r[lag_min:lag_max + 1]
        peak = band.max()
        if peak < VOICING_THRESHOLD:
            continue
        # shortest-lag local maximum close to the global peak avoids octave drops
        k = lag_min + int(np.argmax(band))
        for j in range(max(lag_min, 1), lag_max + 1):
            if r[j] >= 0.9 * peak and r[j] >= r[j - 1] and r[j] >= r[j + 1]:
                k = j
                break
        a, b, c = r[k - 1], r[k], r[k + 1]
        curv = a - 2 * b + c
        shift = 0.5 * (a - c) / curv if curv < 0 else 0.0
        f0[i] = sr / (k + shift)
        voiced[i] = 1
    return f0, voiced


def zero_crossing_counts(w: Waveform, grid: FrameGrid, span: float = 0.005) -> np.ndarray:
    """Sign changes inside a ``span``-second window centred on every frame."""
    x = w.samples
    n = int(round(span * grid.sample_rate))
    changes = (np.signbit(x[1:]) != np.signbit(x[:-1])).astype(np.int64)
    csum = np.concatenate([[0], np.cumsum(changes)])
    centers = np.arange(grid.num_frames) * grid.hop_length + grid.win_length // 2
    lo = np.clip(centers - n // 2, 0, x.size - 1)
    hi = np.clip(centers - n // 2 + n - 1, 0, x.size - 1)
    # pairs (i, i+1) with lo <= i < hi
    return csum[hi] - csum[lo]


def zero_crossings(w: Waveform, grid: FrameGrid, t: int) -> int:
    grid._check(t)
    return int(zero_crossing_counts(w, grid)[t - 1])
