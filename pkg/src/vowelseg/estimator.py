"""scikit-learn style wrappers around the feature extractor, the frame
classifier and the vowel boundary model."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .audio import load_waveform
from .classifier import MFCC_DIM, train_pa_multiclass
from .decode import DecoderConstraints, LossParams, decode, loss
from .dsp import Waveform
from .features import FEATURE_NAMES, AcousticFrameSequence, extract_features
from .train import TrainConfig, TrainingExample, train_full


class AcousticFeatureExtractor(TransformerMixin, BaseEstimator):
    """Waveforms (or WAV paths) to per-frame acoustic feature sequences.

    Stateless: ``fit`` only records the output width.  ``transform`` returns
    a list, since utterances have different frame counts.
    """

    def __init__(self, classifier=None, hop=0.005, window=0.025):
        self.classifier = classifier
        self.hop = hop
        self.window = window

    def fit(self, X=None, y=None):
        self.n_features_out_ = len(FEATURE_NAMES)
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_out_")
        out = []
        for item in X:
            w = item if isinstance(item, Waveform) else load_waveform(item)
            out.append(extract_features(w, self.classifier, self.hop, self.window))
        return out

    def get_feature_names_out(self, input_features=None):
        return np.array(FEATURE_NAMES, dtype=object)


class PassiveAggressiveFrameClassifier(ClassifierMixin, BaseEstimator):
    """Averaged multiclass PA-I over 39-dimensional MFCC frames."""

    def __init__(self, C=0.5, epochs=10, random_state=0, vowel_classes=(), nasal_classes=()):
        self.C = C
        self.epochs = epochs
        self.random_state = random_state
        self.vowel_classes = vowel_classes
        self.nasal_classes = nasal_classes

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        if X.shape[1] != MFCC_DIM:
            raise ValueError(f"expected {MFCC_DIM} features, got {X.shape[1]}")
        self.classes_ = np.unique(y)
        names = [str(c) for c in self.classes_]
        self.classifier_ = train_pa_multiclass(
            X, [str(v) for v in y], C=self.C, epochs=self.epochs, seed=self.random_state,
            class_names=names, vowel_set={str(c) for c in self.vowel_classes},
            nasal_set={str(c) for c in self.nasal_classes})
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "classifier_")
        X = check_array(X, dtype=np.float64)
        return self.classifier_.scores(X)

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


class VowelDurationEstimator(BaseEstimator):
    """Vowel onset/offset predictor.

    ``X`` is a sequence of :class:`AcousticFrameSequence`; ``y`` holds
    ``(onset_frame, offset_frame)`` rows, 1-based.  ``score`` is the negative
    mean absolute boundary deviation in frames, so larger is better.
    """

    def __init__(self, eta0=0.1, epsilon=-1.36, tau_b=1, tau_e=2, pa_C=0.5, pa_epochs=100,
                 dlm_iters=None, dev_fraction=0.1, margin_before=14, margin_after=10,
                 min_duration=5, max_duration=0, with_classifier=False, random_state=0):
        self.eta0 = eta0
        self.epsilon = epsilon
        self.tau_b = tau_b
        self.tau_e = tau_e
        self.pa_C = pa_C
        self.pa_epochs = pa_epochs
        self.dlm_iters = dlm_iters
        self.dev_fraction = dev_fraction
        self.margin_before = margin_before
        self.margin_after = margin_after
        self.min_duration = min_duration
        self.max_duration = max_duration
        self.with_classifier = with_classifier
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        constraints = DecoderConstraints(self.margin_before, self.margin_after,
                                         self.min_duration, self.max_duration)
        return TrainConfig(eta0=self.eta0, epsilon=self.epsilon, tau_b=self.tau_b,
                           tau_e=self.tau_e, pa_C=self.pa_C, pa_epochs=self.pa_epochs,
                           dlm_iters=self.dlm_iters, seed=self.random_state,
                           dev_fraction=self.dev_fraction, constraints=constraints)

    @staticmethod
    def _check_sequences(X):
        X = list(X)
        for s in X:
            if not isinstance(s, AcousticFrameSequence):
                raise TypeError("X must contain AcousticFrameSequence objects")
        return X

    def fit(self, X, y):
        X = self._check_sequences(X)
        y = check_array(y, dtype=np.int64, ensure_min_samples=2)
        if y.shape != (len(X), 2):
            raise ValueError("y must have one (onset, offset) row per sequence")
        data = [TrainingExample(s, (int(a), int(b)), str(i)) for i, (s, (a, b)) in
                enumerate(zip(X, y))]
        self.model_ = train_full(data, self._config(), with_classifier=self.with_classifier)
        self.n_features_ = self.model_.layout.n
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = self._check_sequences(X)
        return np.array([decode(s, self.model_)[0] for s in X], dtype=np.int64).reshape(-1, 2)

    def score(self, X, y):
        y = check_array(y, dtype=np.int64)
        pred = self.predict(X)
        return -float(np.mean([loss(t, p, LossParams()) for t, p in zip(y, pred)]))
