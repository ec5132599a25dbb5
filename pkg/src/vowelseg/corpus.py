"""Corpus manifests, frame/second conversion and example ingestion."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .audio import load_waveform
from .decode import DecoderConstraints
from .dsp import frame_signal, mfcc_sequence
from .features import extract_features
from .train import TrainingExample

log = logging.getLogger(__name__)

MANIFEST_FIELDS = ("audio_path", "onset_s", "offset_s", "onset_context", "coda_context", "token_id")
CONTEXT_CLASSES = ("voiceless_stop", "voiced_stop", "fricative", "sonorant")
SEGMENT_FIELDS = ("audio_path", "start_s", "end_s", "label")


@dataclass(frozen=True)
class ManifestRow:
    audio_path: str
    onset_s: float
    offset_s: float
    onset_context: str
    coda_context: str
    token_id: str
    line: int = 0

    @property
    def context(self) -> Optional[tuple]:
        if not self.onset_context and not self.coda_context:
            return None
        return (self.onset_context, self.coda_context)


def seconds_to_frame(seconds: float, hop: float = 0.005) -> int:
    """Nearest 1-based frame whose start lies closest to ``seconds``."""
    return int(np.floor(seconds / hop + 0.5)) + 1


def frame_to_seconds(t: int, hop: float = 0.005) -> float:
    return (t - 1) * hop


def read_manifest(path) -> tuple[list[ManifestRow], list[tuple[int, str]]]:
    """Parse a manifest; returns good rows and ``(line, message)`` diagnostics."""
    rows, errors, seen = [], [], set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(MANIFEST_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: manifest header lacks {sorted(missing)}")
        for line, rec in enumerate(reader, start=2):
            try:
                onset, offset = float(rec["onset_s"]), float(rec["offset_s"])
            except (TypeError, ValueError):
                errors.append((line, "onset_s/offset_s are not numbers"))
                continue
            if not onset < offset:
                errors.append((line, f"onset_s {onset} is not before offset_s {offset}"))
                continue
            token = (rec["token_id"] or "").strip()
            if not token or token in seen:
                errors.append((line, f"missing or duplicate token_id {token!r}"))
                continue
            ctx = [(rec.get(k) or "").strip() for k in ("onset_context", "coda_context")]
            bad_ctx = [c for c in ctx if c and c not in CONTEXT_CLASSES]
            if bad_ctx:
                errors.append((line, f"unknown context class {bad_ctx[0]!r}"))
                continue
            seen.add(token)
            rows.append(ManifestRow(rec["audio_path"], onset, offset, ctx[0], ctx[1], token, line))
    return rows, errors


def write_manifest(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_FIELDS)
        for r in rows:
            writer.writerow([r.audio_path, f"{r.onset_s:.6f}", f"{r.offset_s:.6f}",
                             r.onset_context, r.coda_context, r.token_id])


def resolve(base: Path, audio_path: str) -> Path:
    p = Path(audio_path)
    return p if p.is_absolute() else base / p


def _extract(args):
    path, clf = args
    return extract_features(load_waveform(path), clf)


def _map(fn, items, jobs: int):
    """``fn`` over ``items``, optionally in worker processes; failures come
    back as exceptions in place."""
    if jobs <= 1 or len(items) < 2:
        out = []
        for it in items:
            try:
                out.append(fn(it))
            except Exception as exc:  # noqa: BLE001 - reported per file
                out.append(exc)
        return out
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, it) for it in items]
        out = []
        for f in futures:
            try:
                out.append(f.result())
            except Exception as exc:  # noqa: BLE001
                out.append(exc)
        return out


def extract_many(paths, clf=None, jobs: int = 1):
    """Features for many files; failures come back as exceptions in place."""
    return _map(_extract, [(p, clf) for p in paths], jobs)


def load_examples(manifest_path, clf=None, constraints: DecoderConstraints = DecoderConstraints(),
                  hop: float = 0.005, jobs: int = 1, require_admissible: bool = True):
    """Manifest rows to training examples.

    Returns ``(examples, rows, diagnostics)`` where ``rows`` are the manifest
    rows kept, aligned with ``examples``.  With ``require_admissible`` rows
    whose target pair the decoder could never output are dropped.
    """
    manifest_path = Path(manifest_path)
    rows, diags = read_manifest(manifest_path)
    paths = [resolve(manifest_path.parent, r.audio_path) for r in rows]
    seqs = extract_many(paths, clf, jobs)
    examples, kept = [], []
    for row, seq in zip(rows, seqs):
        if isinstance(seq, Exception):
            diags.append((row.line, f"{row.audio_path}: {seq}"))
            continue
        target = (seconds_to_frame(row.onset_s, hop), seconds_to_frame(row.offset_s, hop))
        if require_admissible and not constraints.admissible(len(seq), target):
            diags.append((row.line, f"target frames {target} violate decoder constraints "
                                    f"for T={len(seq)}"))
            continue
        examples.append(TrainingExample(seq, target, row.token_id, row.context))
        kept.append(row)
    diags.sort()
    return examples, kept, diags


def read_segments(path) -> list[tuple[str, float, float, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [(r["audio_path"], float(r["start_s"]), float(r["end_s"]), r["label"]) for r in reader]


def read_class_inventory(path) -> tuple[list[str], set, set]:
    """CSV ``class,kind`` with kind in {vowel, nasal, other}."""
    names, vowels, nasals = [], set(), set()
    with open(path, newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            name, kind = r["class"].strip(), r["kind"].strip()
            if kind not in ("vowel", "nasal", "other"):
                raise ValueError(f"class {name!r}: unknown kind {kind!r}")
            names.append(name)
            if kind == "vowel":
                vowels.add(name)
            elif kind == "nasal":
                nasals.add(name)
    return names, vowels, nasals


def _labelled_mfcc(args):
    path, spans, hop, window = args
    w = load_waveform(path)
    grid = frame_signal(w, hop, window)
    mfcc = mfcc_sequence(w, grid)
    centres = (np.arange(grid.num_frames) * hop) + window / 2
    X, y = [], []
    for start, end, label in spans:
        idx = np.flatnonzero((centres >= start) & (centres < end))
        X.append(mfcc[idx])
        y += [label] * idx.size
    return (np.concatenate(X) if X else np.zeros((0, mfcc.shape[1]))), y


def labelled_frames(segments_path, hop: float = 0.005, window: float = 0.025, jobs: int = 1):
    """MFCC frames labelled by the segment containing each frame centre.

    Returns ``(X, y, diagnostics)``; files that fail to load are reported and
    skipped.
    """
    segments_path = Path(segments_path)
    by_file: dict[str, list] = {}
    for audio, start, end, label in read_segments(segments_path):
        by_file.setdefault(audio, []).append((start, end, label))
    items = [(resolve(segments_path.parent, a), spans, hop, window) for a, spans in by_file.items()]
    results = _map(_labelled_mfcc, items, jobs)
    Xs, ys, diags = [], [], []
    for (path, *_), res in zip(items, results):
        if isinstance(res, Exception):
            diags.append(f"{path}: {res}")
            continue
        Xs.append(res[0])
        ys += res[1]
    X = np.concatenate(Xs) if Xs else np.zeros((0, 39))
    return X, ys, diags
