"""Task loss, exact linear decoder and loss-augmented decoder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LayoutMismatchError, NoAdmissiblePairError
from .featfunc import MARGIN_AFTER, MARGIN_BEFORE, CompiledLayout, span_mean


@dataclass(frozen=True)
class DecoderConstraints:
    margin_before: int = MARGIN_BEFORE
    margin_after: int = MARGIN_AFTER
    min_duration: int = 5
    max_duration: int = 0  # 0 = unbounded

    def __post_init__(self):
        if self.margin_before < MARGIN_BEFORE or self.margin_after < MARGIN_AFTER:
            raise ValueError(f"margins must be at least ({MARGIN_BEFORE}, {MARGIN_AFTER}) "
                             "so that every feature window fits")
        if self.min_duration < 1:
            raise ValueError("min_duration must be >= 1")
        if self.max_duration < 0 or (self.max_duration and self.max_duration < self.min_duration):
            raise ValueError("max_duration must be 0 or >= min_duration")

    def onset_range(self, T: int) -> np.ndarray:
        return np.arange(self.margin_before + 1, T - self.margin_after - self.min_duration + 1)

    def offset_range(self, T: int) -> np.ndarray:
        return np.arange(self.margin_before + 1 + self.min_duration, T - self.margin_after + 1)

    def admissible(self, T: int, pair) -> bool:
        t_b, t_e = int(pair[0]), int(pair[1])
        d = t_e - t_b
        return (t_b >= self.margin_before + 1 and t_e <= T - self.margin_after
                and d >= self.min_duration and (not self.max_duration or d <= self.max_duration))


@dataclass(frozen=True)
class LossParams:
    tau_b: float = 0
    tau_e: float = 0

    def __post_init__(self):
        if self.tau_b < 0 or self.tau_e < 0:
            raise ValueError("tolerances must be non-negative")


def loss(target, pred, p: LossParams = LossParams()) -> float:
    """Tolerant absolute boundary loss in frames."""
    return (max(abs(pred[0] - target[0]) - p.tau_b, 0)
            + max(abs(pred[1] - target[1]) - p.tau_e, 0))


class CandidateSet:
    """Every admissible pair of one utterance, with phi pre-split into
    onset, offset and joint parts so a full score matrix costs a few
    K x K array operations."""

    def __init__(self, seq, layout, priors, constraints: DecoderConstraints,
                 compiled: CompiledLayout | None = None):
        frames = seq.frames
        self.frames = frames
        self.T = T = frames.shape[0]
        self.compiled = compiled or CompiledLayout(layout)
        self.constraints = constraints
        self.onsets = constraints.onset_range(T)
        self.offsets = constraints.offset_range(T)
        if self.onsets.size == 0 or self.offsets.size == 0:
            raise NoAdmissiblePairError(
                f"utterance too short for constraints: T={T} frames")
        self.duration = self.offsets[None, :] - self.onsets[:, None]
        valid = self.duration >= constraints.min_duration
        if constraints.max_duration:
            valid &= self.duration <= constraints.max_duration
        if not valid.any():
            raise NoAdmissiblePairError(
                f"utterance too short for constraints: T={T} frames")
        self.valid = valid
        windows = self.compiled.windows(frames)
        self.onset_phi = self.compiled.onset_terms(frames, windows, self.onsets)
        self.offset_phi = self.compiled.offset_terms(frames, windows, self.offsets)
        self.span = np.maximum(self.duration + 1, 1)
        max_d = int(self.duration.max())
        d_axis = np.arange(max_d + 1)
        self.prior_table = np.array([priors.density(k, d_axis) for k in self.compiled.prior_kinds]
                                    ).reshape(len(self.compiled.prior_kinds), max_d + 1)
        self.duration_idx = np.clip(self.duration, 0, max_d)

    def index_of(self, pair) -> tuple[int, int]:
        i = int(pair[0]) - int(self.onsets[0])
        j = int(pair[1]) - int(self.offsets[0])
        if not (0 <= i < self.onsets.size and 0 <= j < self.offsets.size and self.valid[i, j]):
            raise ValueError(f"pair {tuple(pair)} is not admissible")
        return i, j

    def phi(self, pair) -> np.ndarray:
        """Raw (unnormalized) phi at an admissible pair."""
        i, j = self.index_of(pair)
        t_b, t_e = int(pair[0]), int(pair[1])
        out = self.onset_phi[i] + self.offset_phi[j]
        c = self.compiled
        if c.interval_rows.size:
            out[c.interval_rows] += span_mean(self.frames, t_b, t_e)[c.interval_cols]
        if c.prior_rows.size:
            out[c.prior_rows] += self.prior_table[:, t_e - t_b]
        return out

    def score_matrix(self, v: np.ndarray) -> np.ndarray:
        """v . phi_raw for every candidate pair; inadmissible cells are -inf."""
        c = self.compiled
        S = (self.onset_phi @ v)[:, None] + (self.offset_phi @ v)[None, :]
        if c.interval_rows.size:
            weights = np.zeros(self.frames.shape[1])
            np.add.at(weights, c.interval_cols, v[c.interval_rows])
            # running sums restarted at every onset: a cell only ever adds
            # frames from its own interval
            lo, hi = int(self.onsets[0]), int(self.offsets[-1])
            z = self.frames[lo - 1:hi] @ weights
            frame_no = np.arange(lo, hi + 1)
            run = np.cumsum(np.where(frame_no[None, :] >= self.onsets[:, None], z[None, :], 0.0),
                            axis=1)
            S += run[:, self.offsets - lo] / self.span
        if c.prior_rows.size:
            S += (v[c.prior_rows] @ self.prior_table)[self.duration_idx]
        return np.where(self.valid, S, -np.inf)

    def loss_matrix(self, target, p: LossParams) -> np.ndarray:
        gb = np.maximum(np.abs(self.onsets - target[0]) - p.tau_b, 0)
        ge = np.maximum(np.abs(self.offsets - target[1]) - p.tau_e, 0)
        return gb[:, None] + ge[None, :]

    def best(self, S: np.ndarray) -> tuple[int, int]:
        # row-major argmax: smallest onset, then smallest offset, on ties
        i, j = np.unravel_index(int(np.argmax(S)), S.shape)
        return int(self.onsets[i]), int(self.offsets[j])


def effective_weights(model) -> tuple[np.ndarray, float]:
    """Fold the z-score table into the weights: w.phi_norm = v.phi_raw + const."""
    if model.normalization is None:
        return np.asarray(model.w, dtype=np.float64), 0.0
    v = model.w / model.normalization.std
    return v, -float(v @ model.normalization.mean)


def candidates_for(seq, model) -> CandidateSet:
    if model.layout.fingerprint != model.fingerprint:
        raise LayoutMismatchError(
            f"model fingerprint {model.fingerprint} != layout {model.layout.fingerprint}")
    return CandidateSet(seq, model.layout, model.priors, model.constraints)


def decode(seq, model, cache: CandidateSet | None = None):
    """Highest-scoring admissible pair and its score ``w . phi``."""
    cache = cache or candidates_for(seq, model)
    v, const = effective_weights(model)
    S = cache.score_matrix(v)
    pair = cache.best(S)
    i, j = cache.index_of(pair)
    return pair, float(S[i, j] + const)


def decode_loss_augmented(seq, model, target, epsilon: float, p: LossParams,
                          cache: CandidateSet | None = None):
    """argmax of ``w . phi + epsilon * loss(target, .)`` over admissible pairs."""
    cache = cache or candidates_for(seq, model)
    v, _ = effective_weights(model)
    S = cache.score_matrix(v)
    if epsilon:
        S = S + epsilon * cache.loss_matrix(target, p)
    return cache.best(S)
