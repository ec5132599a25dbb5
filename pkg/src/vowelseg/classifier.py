"""Linear frame-level phone-class scorer and its multiclass PA-I trainer."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

MFCC_DIM = 39


@dataclass(frozen=True)
class LabeledFrame:
    mfcc: np.ndarray
    label: str


@dataclass(frozen=True)
class FrameClassifier:
    class_names: tuple
    vowel_set: frozenset
    nasal_set: frozenset
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        names = tuple(self.class_names)
        vowels, nasals = frozenset(self.vowel_set), frozenset(self.nasal_set)
        if len(set(names)) != len(names):
            raise ValueError("duplicate class names")
        if not vowels <= set(names) or not nasals <= set(names):
            raise ValueError("vowel/nasal sets must be subsets of class_names")
        if vowels & nasals:
            raise ValueError("vowel_set and nasal_set must be disjoint")
        weights = np.asarray(self.weights, dtype=np.float64)
        if weights.shape != (len(names), MFCC_DIM):
            raise ValueError(f"weights must be {len(names)} x {MFCC_DIM}")
        object.__setattr__(self, "class_names", names)
        object.__setattr__(self, "vowel_set", vowels)
        object.__setattr__(self, "nasal_set", nasals)
        object.__setattr__(self, "weights", weights)

    @property
    def vowel_mask(self) -> np.ndarray:
        return np.array([c in self.vowel_set for c in self.class_names])

    @property
    def nasal_mask(self) -> np.ndarray:
        return np.array([c in self.nasal_set for c in self.class_names])

    def scores(self, mfcc: np.ndarray) -> np.ndarray:
        """Scores for a single 39-vector or a T x 39 matrix."""
        mfcc = np.asarray(mfcc, dtype=np.float64)
        if mfcc.shape[-1] != MFCC_DIM:
            raise ValueError(f"expected {MFCC_DIM}-dimensional MFCC input, got {mfcc.shape}")
        return mfcc @ self.weights.T

    def predict(self, mfcc: np.ndarray):
        """Predicted class index (ties go to the first class)."""
        return np.argmax(self.scores(mfcc), axis=-1)


def score_frame(clf: FrameClassifier, mfcc) -> dict:
    s = clf.scores(np.asarray(mfcc).reshape(-1))
    return dict(zip(clf.class_names, s.tolist()))


def pa_multiclass_step(W: np.ndarray, x: np.ndarray, y: int, C: float) -> tuple[float, int]:
    """One in-place PA-I update; returns ``(tau, rival)``."""
    s = W @ x
    rival_scores = s.copy()
    rival_scores[y] = -np.inf
    rival = int(np.argmax(rival_scores))
    loss = max(0.0, 1.0 - s[y] + s[rival])
    sq = 2.0 * float(x @ x)
    if loss == 0.0 or sq == 0.0:
        return 0.0, rival
    tau = min(C, loss / sq)
    W[y] += tau * x
    W[rival] -= tau * x
    return tau, rival


def train_pa_multiclass(X, y: Sequence, C: float = 0.5, epochs: int = 10, seed: int = 0,
                        class_names: Iterable | None = None,
                        vowel_set: Iterable = (), nasal_set: Iterable = ()) -> FrameClassifier:
    """Averaged multiclass PA-I over MFCC frames.

    Parameters
    ----------
    X : array of shape (n_frames, 39), or a sequence of :class:`LabeledFrame`
        (then ``y`` must be None).
    y : labels aligned with ``X``.
    C : aggressiveness cap on the step size.
    epochs : passes over the data, in a seeded shuffled order each pass.

    Returns the classifier whose weights are the mean of the weight matrix
    after every step.
    """
    if y is None:
        frames = list(X)
        X = np.array([f.mfcc for f in frames], dtype=np.float64)
        y = [f.label for f in frames]
    X = np.asarray(X, dtype=np.float64)
    if C <= 0:
        raise ValueError("C must be positive")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if X.ndim != 2 or X.shape[1] != MFCC_DIM or X.shape[0] != len(y):
        raise ValueError("X must be n x 39 and aligned with y")
    if class_names is None:
        class_names = sorted(set(y))
    class_names = tuple(class_names)
    index = {c: i for i, c in enumerate(class_names)}
    unknown = set(y) - set(index)
    if unknown:
        raise ValueError(f"labels not in class inventory: {sorted(unknown)}")
    if len(set(y)) < 2:
        raise ValueError("need at least two distinct classes to train")
    labels = np.array([index[c] for c in y])

    rng = np.random.default_rng(seed)
    W = np.zeros((len(class_names), MFCC_DIM))
    # sum over steps of step_index * update, for the lazy average
    weighted = np.zeros_like(W)
    step = 0
    for _ in range(epochs):
        for i in rng.permutation(len(labels)):
            step += 1
            tau, rival = pa_multiclass_step(W, X[i], labels[i], C)
            if tau:
                weighted[labels[i]] += step * tau * X[i]
                weighted[rival] -= step * tau * X[i]
    averaged = ((step + 1) * W - weighted) / step
    return FrameClassifier(class_names, frozenset(vowel_set), frozenset(nasal_set), averaged)
