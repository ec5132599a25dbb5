"""WAV reading/writing and resampling to the canonical 16 kHz."""

from __future__ import annotations

import wave
from math import gcd
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .dsp import Waveform

TARGET_RATE = 16000


class UnsupportedAudioError(ValueError):
    pass


def read_wav(path) -> tuple[np.ndarray, int]:
    """Integer PCM (16/24/32-bit) to floats in [-1, 1]; first channel only."""
    try:
        with wave.open(str(path), "rb") as wf:
            n_ch, width, rate, n = wf.getnchannels(), wf.getsampwidth(), wf.getframerate(), wf.getnframes()
            raw = wf.readframes(n)
    except (wave.Error, EOFError) as exc:
        raise UnsupportedAudioError(f"{path}: {exc}") from exc
    if width == 2:
        data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif width == 3:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        ints = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        data = ints.astype(np.float64) / float(1 << 23)
    elif width == 4:
        data = np.frombuffer(raw, dtype="<i4").astype(np.float64) / float(1 << 31)
    else:
        raise UnsupportedAudioError(f"{path}: unsupported sample width {8 * width} bits")
    data = data.reshape(-1, n_ch)[:, 0]
    return data, rate


def write_wav(path, samples: np.ndarray, rate: int = TARGET_RATE) -> None:
    """16-bit PCM mono."""
    pcm = np.round(np.clip(samples, -1.0, 32767 / 32768) * 32768.0).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(rate)
        wf.writeframes(pcm.tobytes())


def resample(samples: np.ndarray, rate: int, target: int = TARGET_RATE) -> np.ndarray:
    if rate == target:
        return np.asarray(samples, dtype=np.float64)
    g = gcd(int(rate), int(target))
    out = resample_poly(samples, target // g, rate // g, window=("kaiser", 8.0))
    return np.clip(out, -1.0, 1.0)


def load_waveform(path: str | Path, target: int = TARGET_RATE) -> Waveform:
    samples, rate = read_wav(path)
    if samples.size == 0:
        raise UnsupportedAudioError(f"{path}: no samples")
    return Waveform(resample(samples, rate, target), target)
