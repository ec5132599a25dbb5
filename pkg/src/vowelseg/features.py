"""Per-frame acoustic description of an utterance (16 columns)."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d
from scipy.special import logsumexp

from . import dsp
from .dsp import EPS_FLOOR, Waveform

FEATURE_NAMES = (
    "E_short_term", "E_total", "E_low", "E_high", "H_wiener", "S_max",
    "F0_hat", "V_rapt", "N_zc", "G_vowel", "G_nasal", "L_vowel",
    "D1", "D2", "D3", "D4",
)
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}
CLASSIFIER_FEATURES = ("G_vowel", "G_nasal", "L_vowel")

LOW_BAND = (20.0, 300.0)
HIGH_BAND_START = 3000.0
SMAX_REGION = (-0.006, 0.018)
SMOOTHING_LENGTH = 5
NO_CLASSIFIER_FILL = 0.5


@dataclass(frozen=True)
class AcousticFrameSequence:
    frames: np.ndarray
    hop: float = 0.005
    feature_names: tuple = FEATURE_NAMES

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[1] != len(FEATURE_NAMES):
            raise ValueError(f"expected T x {len(FEATURE_NAMES)} frames, got {frames.shape}")
        if frames.shape[0] < 1:
            raise ValueError("empty frame sequence")
        if not np.all(np.isfinite(frames)):
            raise ValueError("frame matrix contains non-finite values")
        if tuple(self.feature_names) != FEATURE_NAMES:
            raise ValueError("feature columns must follow FEATURE_NAMES order")
        object.__setattr__(self, "frames", frames)

    def __len__(self):
        return self.frames.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.frames[:, FEATURE_INDEX[name]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.feature_names)
        for row in self.frames:
            writer.writerow([f"{v:.9g}" for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, hop: float = 0.005) -> "AcousticFrameSequence":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(rows[0]) != FEATURE_NAMES:
            raise ValueError("CSV header does not match feature names")
        return cls(np.array([[float(v) for v in r] for r in rows[1:]]), hop=hop)


def smoothing_kernel(length: int = SMOOTHING_LENGTH) -> np.ndarray:
    k = np.hamming(length)
    return k / k.sum()


def smooth(column: np.ndarray, length: int = SMOOTHING_LENGTH) -> np.ndarray:
    """Normalized Hamming smoothing with edge replication."""
    return convolve1d(np.asarray(column, dtype=np.float64), smoothing_kernel(length),
                      mode="nearest")


def normalize_f0(f0: np.ndarray, voiced: np.ndarray) -> np.ndarray:
    """Min-max scale voiced f0 to [0, 1]; unvoiced frames are 0."""
    out = np.zeros_like(f0, dtype=np.float64)
    mask = voiced.astype(bool)
    if not mask.any():
        return out
    lo, hi = f0[mask].min(), f0[mask].max()
    out[mask] = (f0[mask] - lo) / (hi - lo) if hi > lo else 1.0
    return out


def gibbs_vowel_likelihood(scores, vowel_set, class_names=None) -> float:
    """Softmax mass on the vowel classes.

    ``scores`` is either a mapping ``class -> score`` or an array aligned
    with ``class_names``.
    """
    if isinstance(scores, dict):
        class_names = list(scores)
        values = np.array([scores[c] for c in class_names], dtype=np.float64)
    else:
        values = np.asarray(scores, dtype=np.float64)
        if class_names is None:
            class_names = list(range(values.size))
    if values.size == 0 or not vowel_set:
        raise ValueError("scores and vowel_set must be non-empty")
    mask = np.array([c in vowel_set for c in class_names])
    if not mask.any():
        raise ValueError("vowel_set shares no class with the scores")
    return float(np.exp(logsumexp(values[mask]) - logsumexp(values)))


def gibbs_vowel_likelihoods(score_matrix: np.ndarray, vowel_mask: np.ndarray) -> np.ndarray:
    return np.exp(logsumexp(score_matrix[:, vowel_mask], axis=1)
                  - logsumexp(score_matrix, axis=1))


def mfcc_distances(mfcc: np.ndarray, j: int) -> np.ndarray:
    """||a[t-j] - a[t+j]|| with edge replication."""
    T = mfcc.shape[0]
    idx = np.arange(T)
    before = mfcc[np.clip(idx - j, 0, T - 1)]
    after = mfcc[np.clip(idx + j, 0, T - 1)]
    return np.linalg.norm(after - before, axis=1)


def _smax(power: np.ndarray, hop: float) -> np.ndarray:
    T = power.shape[0]
    k_lo = math.ceil(SMAX_REGION[0] / hop - 1e-9)
    k_hi = math.floor(SMAX_REGION[1] / hop + 1e-9)
    peak = power.max(axis=1)
    idx = np.arange(T)
    shifted = [peak[np.clip(idx + k, 0, T - 1)] for k in range(k_lo, k_hi + 1)]
    return np.log(EPS_FLOOR + np.max(shifted, axis=0))


def extract_features(w: Waveform, clf=None, hop: float = 0.005,
                     window: float = 0.025) -> AcousticFrameSequence:
    """Compute the T x 16 feature matrix for one utterance.

    Without a classifier the G_vowel, G_nasal and L_vowel columns hold the
    constant 0.5.
    """
    grid = dsp.frame_signal(w, hop=hop, window=window)
    power = dsp.power_spectrogram(w, grid)
    bw = grid.bin_width
    nyquist = (power.shape[1] - 1) * bw
    T = grid.num_frames

    raw = dsp.frame_matrix(w, grid)
    cols = {
        "E_short_term": np.log(EPS_FLOOR + np.sum(raw ** 2, axis=1)),
        "E_total": np.log(EPS_FLOOR + power.sum(axis=1)),
        "E_low": dsp.band_energies(power, bw, *LOW_BAND),
        "E_high": dsp.band_energies(power, bw, HIGH_BAND_START, nyquist),
        "H_wiener": dsp.wiener_entropies(power),
        "S_max": _smax(power, hop),
    }
    f0, voiced = dsp.pitch_track(w, grid)
    cols["F0_hat"] = smooth(normalize_f0(f0, voiced))
    cols["V_rapt"] = smooth(voiced.astype(np.float64))
    cols["N_zc"] = dsp.zero_crossing_counts(w, grid).astype(np.float64)

    mfcc = dsp.mfcc_sequence(w, grid, power=power)
    if clf is None:
        for name in CLASSIFIER_FEATURES:
            cols[name] = np.full(T, NO_CLASSIFIER_FILL)
    else:
        scores = clf.scores(mfcc)
        predicted = np.argmax(scores, axis=1)
        cols["G_vowel"] = smooth(clf.vowel_mask[predicted].astype(np.float64))
        cols["G_nasal"] = smooth(clf.nasal_mask[predicted].astype(np.float64))
        cols["L_vowel"] = gibbs_vowel_likelihoods(scores, clf.vowel_mask)
    for j in range(1, 5):
        cols[f"D{j}"] = mfcc_distances(mfcc, j)

    frames = np.column_stack([cols[name] for name in FEATURE_NAMES])
    return AcousticFrameSequence(frames, hop=hop)
