"""Feature functions phi(x, t_b, t_e) over an acoustic frame sequence.

The layout is a frozen, ordered list of :class:`FeatureFunction`
descriptors.  Every entry is one of

* ``point``          -- x at the anchor frame,
* ``window_diff``    -- mean of ``delta`` frames before the (possibly shifted)
  anchor minus the mean of ``delta`` frames from it,
* ``interval_mean``  -- mean over [t_b, t_e] minus the mean of ``delta``
  frames just before t_b (``before``) or just after t_e (``after``),
* ``duration_prior`` -- Normal or Gamma density of ``t_e - t_b``.

Fixed-width window means come from per-utterance tables, one per width,
so every window entry is an O(1) lookup.  Each table cell is summed from its
own frames only, which keeps phi bit-exactly independent of frames outside
[t_b - 14, t_e + 10]; a whole-utterance prefix sum would leak rounding from
distant frames into every difference.  Frame indices are 1-based throughout.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import stats

from .features import CLASSIFIER_FEATURES, FEATURE_INDEX, AcousticFrameSequence

TYPE3_WINDOW = 8
MAX_DELTA = 10
MAX_OFFSET = 4
MARGIN_BEFORE = MAX_DELTA + MAX_OFFSET
MARGIN_AFTER = MAX_DELTA
STD_FLOOR = 1e-8

# Column order of the derivative table, left to right.
_TABLE_COLUMNS = (
    "E_short_term", "E_low", "E_high", "E_total", "H_wiener", "S_max", "F0_hat",
    "V_rapt", "N_zc", "G_vowel", "G_nasal", "L_vowel", "D1", "D2", "D3", "D4",
)

_BE = ("b", "e")
_D_BOTH = {f"D{j}": _BE for j in range(1, 5)}
_WIDE = {"E_low": _BE, "E_high": _BE, "E_total": _BE, "H_wiener": _BE,
         "F0_hat": _BE, "V_rapt": _BE, "N_zc": _BE, "G_vowel": _BE,
         "G_nasal": ("e",), "L_vowel": _BE}
_SHIFTED = {"E_low": ("b",), "E_high": ("b",), "E_total": ("b",)}

# (delta, anchor offset, {feature: anchors}) rows, top to bottom.
DERIVATIVE_TABLE = (
    (1, 0, {"S_max": ("b",)}),
    (2, 0, {"S_max": ("b",)}),
    (3, 0, {"E_short_term": _BE, "S_max": ("b",), **_D_BOTH}),
    (4, 0, {"E_short_term": _BE, "S_max": ("b",)}),
    (5, 0, {"E_short_term": ("b",), "S_max": ("b",)}),
    (6, 0, {"E_low": ("b",), "G_vowel": _BE, "L_vowel": _BE}),
    (8, 0, _WIDE),
    (8, -2, _SHIFTED),
    (10, 0, {**_WIDE, **_D_BOTH}),
    (10, -4, _SHIFTED),
)

POINT_FEATURES = (("E_total", ("b",)), ("E_low", ("b",)), ("E_high", ("b",)),
                  ("S_max", ("b",)), ("D1", _BE), ("D2", _BE), ("D3", _BE), ("D4", _BE))
INTERVAL_FEATURES = ("E_short_term", "E_low", "E_high", "E_total", "V_rapt", "N_zc", "L_vowel")


@dataclass(frozen=True)
class FeatureFunction:
    kind: str
    feature: Optional[str] = None
    anchor: Optional[str] = None
    offset: int = 0
    delta: int = 0
    side: Optional[str] = None
    prior: Optional[str] = None

    def __str__(self):
        if self.kind == "point":
            return f"point({self.feature}@t_{self.anchor})"
        if self.kind == "window_diff":
            at = f"t_{self.anchor}" + (f"{self.offset:+d}" if self.offset else "")
            return f"window_diff({self.feature}@{at}, delta={self.delta})"
        if self.kind == "interval_mean":
            return f"interval_mean({self.feature}, {self.side}, delta={self.delta})"
        return f"duration_prior({self.prior})"

    @property
    def uses_classifier(self) -> bool:
        return self.feature in CLASSIFIER_FEATURES


@dataclass(frozen=True)
class FeatureMapLayout:
    entries: tuple
    classifier_features_included: bool

    @property
    def n(self) -> int:
        return len(self.entries)

    def dump(self) -> str:
        return "\n".join(f"{i:3d} {e}" for i, e in enumerate(self.entries)) + "\n"

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(self.dump().encode("utf-8")).hexdigest()[:16]

    @property
    def referenced_features(self) -> set:
        return {e.feature for e in self.entries if e.feature is not None}


def build_layout(with_classifier: bool = True) -> FeatureMapLayout:
    entries = []
    for name, anchors in POINT_FEATURES:
        if anchors == ("b",):
            entries.append(FeatureFunction("point", name, "b"))
    for name, anchors in POINT_FEATURES:
        if anchors == _BE:
            entries.extend(FeatureFunction("point", name, a) for a in _BE)
    for delta, offset, row in DERIVATIVE_TABLE:
        for name in _TABLE_COLUMNS:
            for anchor in row.get(name, ()):
                entries.append(FeatureFunction("window_diff", name, anchor, offset, delta))
    for name in INTERVAL_FEATURES:
        for side in ("before", "after"):
            entries.append(FeatureFunction("interval_mean", name, delta=TYPE3_WINDOW, side=side))
    entries.append(FeatureFunction("duration_prior", prior="normal"))
    entries.append(FeatureFunction("duration_prior", prior="gamma"))
    if not with_classifier:
        entries = [e for e in entries if not e.uses_classifier]
    return FeatureMapLayout(tuple(entries), bool(with_classifier))


@dataclass(frozen=True)
class DurationPriorParams:
    mu_hat: float
    sigma2_hat: float
    k_hat: float
    theta_hat: float

    def __post_init__(self):
        if not (self.sigma2_hat > 0 and self.k_hat > 0 and self.theta_hat > 0):
            raise ValueError("prior variance, shape and scale must be positive")

    def density(self, kind: str, duration):
        d = np.asarray(duration, dtype=np.float64)
        if kind == "normal":
            return stats.norm.pdf(d, loc=self.mu_hat, scale=np.sqrt(self.sigma2_hat))
        if kind == "gamma":
            return stats.gamma.pdf(d, a=self.k_hat, scale=self.theta_hat)
        raise ValueError(f"unknown prior {kind!r}")


def fit_duration_priors(durations) -> DurationPriorParams:
    """Normal by sample mean / unbiased variance; Gamma by moments."""
    d = np.asarray(durations, dtype=np.float64)
    if d.size < 2:
        raise ValueError("need at least two durations")
    if np.any(d < 1):
        raise ValueError("durations must be >= 1 frame")
    mu = float(d.mean())
    var = float(d.var(ddof=1))
    if var <= 0:
        raise ValueError("durations have zero variance")
    return DurationPriorParams(mu, var, mu * mu / var, var / mu)


@dataclass(frozen=True)
class Normalization:
    """Per-entry z-score table over phi."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.shape != std.shape or mean.ndim != 1:
            raise ValueError("mean and std must be 1-D and of equal length")
        if np.any(std <= 0):
            raise ValueError("std entries must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def apply(self, phi: np.ndarray) -> np.ndarray:
        return (phi - self.mean) / self.std

    @classmethod
    def identity(cls, n: int) -> "Normalization":
        return cls(np.zeros(n), np.ones(n))


class PrefixSums:
    """Cumulative column sums of one frame matrix (row 0 is zeros)."""

    def __init__(self, frames: np.ndarray):
        frames = np.asarray(frames, dtype=np.float64)
        self.T = frames.shape[0]
        self.table = np.concatenate([np.zeros((1,) + frames.shape[1:]), np.cumsum(frames, axis=0)])

    def mean(self, t1, t2):
        """Mean of frames t1..t2 (inclusive, 1-based); broadcasts over
        index arrays, returning one row of column means per interval."""
        t1 = np.asarray(t1)
        t2 = np.asarray(t2)
        if np.any(t1 < 1) or np.any(t2 > self.T) or np.any(t1 > t2):
            raise IndexError(f"interval outside 1..{self.T} or empty")
        count = (t2 - t1 + 1).reshape(t2.shape + (1,) * (self.table.ndim - 1))
        return (self.table[t2] - self.table[t1 - 1]) / count


class WindowMeans:
    """Column means of every window of the given widths.

    ``mean(start, width)`` is the mean of frames ``start .. start+width-1``;
    ``start`` may be an index array.
    """

    def __init__(self, frames: np.ndarray, widths):
        frames = np.asarray(frames, dtype=np.float64)
        self.T = frames.shape[0]
        self.tables = {}
        for d in sorted(set(int(w) for w in widths)):
            if d <= self.T:
                self.tables[d] = sliding_window_view(frames, d, axis=0).mean(axis=-1)

    def mean(self, start, width: int):
        start = np.asarray(start)
        if width not in self.tables or np.any(start < 1) or np.any(start + width - 1 > self.T):
            raise IndexError(f"window of {width} frames at {start} exceeds 1..{self.T}")
        return self.tables[width][start - 1]


def span_mean(frames: np.ndarray, t1: int, t2: int) -> np.ndarray:
    """Column means over frames t1..t2, summed directly."""
    return frames[t1 - 1:t2].sum(axis=0) / (t2 - t1 + 1)


def interval_mean(column, t1: int, t2: int) -> float:
    """Mean of ``column`` over frames t1..t2 inclusive (1-based)."""
    return float(PrefixSums(np.asarray(column, dtype=np.float64)).mean(t1, t2))


class CompiledLayout:
    """Index arrays that split phi into onset-only, offset-only and joint parts.

    phi(t_b, t_e) = onset_part(t_b) + offset_part(t_e) + joint_part(t_b, t_e)

    The joint part holds the interval means over [t_b, t_e] of the
    ``interval_mean`` entries and the duration priors.
    """

    def __init__(self, layout: FeatureMapLayout):
        self.layout = layout
        self.n = layout.n
        onset, offset = [], []
        self.interval_rows, self.interval_cols = [], []
        self.prior_rows, self.prior_kinds = [], []
        for i, e in enumerate(layout.entries):
            col = FEATURE_INDEX.get(e.feature)
            if e.kind in ("point", "window_diff"):
                (onset if e.anchor == "b" else offset).append((i, e, col))
            elif e.kind == "interval_mean":
                self.interval_rows.append(i)
                self.interval_cols.append(col)
                (onset if e.side == "before" else offset).append((i, e, col))
            else:
                self.prior_rows.append(i)
                self.prior_kinds.append(e.prior)
        self.onset = onset
        self.offset = offset
        self.interval_rows = np.array(self.interval_rows, dtype=np.int64)
        self.interval_cols = np.array(self.interval_cols, dtype=np.int64)
        self.prior_rows = np.array(self.prior_rows, dtype=np.int64)
        self.widths = sorted({e.delta for e in layout.entries if e.delta})

    @staticmethod
    def _side_terms(entries, frames, windows, anchors, n):
        anchors = np.asarray(anchors, dtype=np.int64)
        out = np.zeros((anchors.size, n))
        for i, e, col in entries:
            if e.kind == "point":
                out[:, i] = frames[anchors - 1, col]
            elif e.kind == "window_diff":
                a = anchors + e.offset
                out[:, i] = (windows.mean(a - e.delta, e.delta)[:, col]
                             - windows.mean(a, e.delta)[:, col])
            elif e.side == "before":
                out[:, i] = -windows.mean(anchors - e.delta, e.delta)[:, col]
            else:
                out[:, i] = -windows.mean(anchors + 1, e.delta)[:, col]
        return out

    def windows(self, frames) -> WindowMeans:
        return WindowMeans(frames, self.widths)

    def onset_terms(self, frames, windows, t_b):
        return self._side_terms(self.onset, frames, windows, t_b, self.n)

    def offset_terms(self, frames, windows, t_e):
        return self._side_terms(self.offset, frames, windows, t_e, self.n)


def check_pair(T: int, t_b: int, t_e: int) -> None:
    if not (t_b < t_e):
        raise ValueError(f"onset {t_b} must precede offset {t_e}")
    if t_b - MARGIN_BEFORE < 1 or t_e + MARGIN_AFTER > T:
        raise IndexError(
            f"pair ({t_b}, {t_e}) leaves feature windows outside 1..{T}; "
            f"need t_b >= {MARGIN_BEFORE + 1} and t_e <= T - {MARGIN_AFTER}")


def eval_phi(seq: AcousticFrameSequence, pair, layout: FeatureMapLayout,
             priors: DurationPriorParams, normalization: Normalization | None = None,
             compiled: CompiledLayout | None = None,
             windows: WindowMeans | None = None) -> np.ndarray:
    """Evaluate the feature map at one onset-offset pair.

    ``compiled`` and ``windows`` may be passed in to reuse per-layout and
    per-utterance tables across many pairs.
    """
    t_b, t_e = int(pair[0]), int(pair[1])
    frames = seq.frames
    check_pair(frames.shape[0], t_b, t_e)
    compiled = compiled or CompiledLayout(layout)
    windows = windows or compiled.windows(frames)
    phi = (compiled.onset_terms(frames, windows, [t_b])[0]
           + compiled.offset_terms(frames, windows, [t_e])[0])
    if compiled.interval_rows.size:
        phi[compiled.interval_rows] += span_mean(frames, t_b, t_e)[compiled.interval_cols]
    for row, kind in zip(compiled.prior_rows, compiled.prior_kinds):
        phi[row] += priors.density(kind, t_e - t_b)
    if normalization is not None:
        phi = normalization.apply(phi)
    return phi
