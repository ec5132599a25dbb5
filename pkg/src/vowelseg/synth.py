"""Seeded synthetic CVC corpus with exact vowel boundaries.

Each token is: leading silence, fricative noise, harmonic vowel with
formant resonances, then either a voiceless stop (closure + burst) or a
fricative coda, then trailing silence.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from scipy.signal import butter, lfilter, sosfilt

from .audio import TARGET_RATE, write_wav
from .corpus import SEGMENT_FIELDS, ManifestRow, write_manifest

SR = TARGET_RATE
NOISE_FLOOR = 3e-4

CLASS_INVENTORY = (("sil", "other"), ("fric", "other"), ("vowel", "vowel"),
                   ("closure", "other"), ("burst", "other"))


def _ramp(n: int, rise: int, fall: int) -> np.ndarray:
    env = np.ones(n)
    if rise:
        env[:rise] = 0.5 - 0.5 * np.cos(np.pi * np.arange(rise) / rise)
    if fall:
        env[n - fall:] = 0.5 + 0.5 * np.cos(np.pi * np.arange(fall) / fall)
    return env


def _fricative(rng, n: int) -> np.ndarray:
    cutoff = rng.uniform(2500, 4500)
    sos = butter(4, cutoff, btype="highpass", fs=SR, output="sos")
    x = sosfilt(sos, rng.standard_normal(n + 256))[256:]
    x *= rng.uniform(0.04, 0.12) / (np.sqrt(np.mean(x ** 2)) + 1e-12)
    return x * _ramp(n, int(0.008 * SR), int(0.005 * SR))


def _resonator(x: np.ndarray, freq: float, bw: float) -> np.ndarray:
    r = np.exp(-np.pi * bw / SR)
    a = [1.0, -2 * r * np.cos(2 * np.pi * freq / SR), r * r]
    return lfilter([1.0 - r], a, x)


def _vowel(rng, n: int) -> np.ndarray:
    f0_start = rng.uniform(120, 220)
    f0 = np.linspace(f0_start, f0_start * rng.uniform(0.85, 1.0), n)
    phase = 2 * np.pi * np.cumsum(f0) / SR
    n_harm = int(4000 // f0_start)
    src = sum(np.sin(k * phase) / k for k in range(1, n_harm + 1))
    formants = [(rng.uniform(300, 800), rng.uniform(60, 120)),
                (rng.uniform(900, 2200), rng.uniform(80, 140))]
    if rng.random() < 0.5:
        formants.append((rng.uniform(2300, 3000), rng.uniform(100, 160)))
    y = sum(_resonator(src, f, b) for f, b in formants)
    y *= rng.uniform(0.3, 0.6) / (np.max(np.abs(y)) + 1e-12)
    return y * _ramp(n, int(0.010 * SR), int(0.015 * SR))


def _stop_coda(rng, n: int) -> tuple[np.ndarray, int]:
    closure = int(n * rng.uniform(0.6, 0.8))
    burst_n = n - closure
    burst = rng.standard_normal(burst_n) * np.exp(-np.arange(burst_n) / (0.006 * SR))
    burst *= rng.uniform(0.05, 0.15) / (np.max(np.abs(burst)) + 1e-12)
    return np.concatenate([np.zeros(closure), burst]), closure


def synth_token(rng) -> dict:
    """One token's samples, boundaries (seconds) and segment labels."""
    lens = {k: int(round(rng.uniform(lo, hi) * SR)) for k, (lo, hi) in
            (("lead", (0.05, 0.15)), ("fric", (0.06, 0.15)), ("vowel", (0.08, 0.30)),
             ("coda", (0.04, 0.12)), ("trail", (0.05, 0.15)))}
    coda_kind = "voiceless_stop" if rng.random() < 0.5 else "fricative"
    parts = [np.zeros(lens["lead"]), _fricative(rng, lens["fric"]), _vowel(rng, lens["vowel"])]
    segments = [("sil", lens["lead"]), ("fric", lens["fric"]), ("vowel", lens["vowel"])]
    if coda_kind == "voiceless_stop":
        coda, closure = _stop_coda(rng, lens["coda"])
        segments += [("closure", closure), ("burst", lens["coda"] - closure)]
    else:
        coda = _fricative(rng, lens["coda"])
        segments.append(("fric", lens["coda"]))
    parts += [coda, np.zeros(lens["trail"])]
    segments.append(("sil", lens["trail"]))
    x = np.concatenate(parts)
    x += NOISE_FLOOR * rng.standard_normal(x.size)
    x = np.clip(x, -0.95, 0.95)

    onset = (lens["lead"] + lens["fric"]) / SR
    offset = onset + lens["vowel"] / SR
    bounds, start = [], 0
    for label, n in segments:
        bounds.append((start / SR, (start + n) / SR, label))
        start += n
    return {"samples": x, "onset_s": onset, "offset_s": offset,
            "onset_context": "fricative", "coda_context": coda_kind, "segments": bounds}


def generate_corpus(count: int, seed: int, out_dir) -> Path:
    """Write ``count`` WAV tokens plus manifest.csv, segments.csv and classes.csv.

    Returns the manifest path.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    rows, seg_rows = [], []
    width = max(4, len(str(count - 1)))
    for i in range(count):
        tok = synth_token(rng)
        name = f"tok{i:0{width}d}.wav"
        write_wav(out / name, tok["samples"])
        rows.append(ManifestRow(name, tok["onset_s"], tok["offset_s"], tok["onset_context"],
                                tok["coda_context"], f"tok{i:0{width}d}"))
        seg_rows += [(name, f"{a:.6f}", f"{b:.6f}", lab) for a, b, lab in tok["segments"]]
    write_manifest(out / "manifest.csv", rows)
    with open(out / "segments.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SEGMENT_FIELDS)
        writer.writerows(seg_rows)
    with open(out / "classes.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("class", "kind"))
        writer.writerows(CLASS_INVENTORY)
    return out / "manifest.csv"
