"""Vowel duration measurement in CVC words by structured prediction."""

from .classifier import FrameClassifier, LabeledFrame, train_pa_multiclass
from .decode import DecoderConstraints, LossParams, decode, decode_loss_augmented, loss
from .dsp import FrameGrid, Waveform, frame_signal
from .errors import (LayoutMismatchError, ModelFormatError, NoAdmissiblePairError,
                     SignalTooShortError)
from .estimator import (AcousticFeatureExtractor, PassiveAggressiveFrameClassifier,
                        VowelDurationEstimator)
from .evalkit import EvalReport, evaluate, pearson
from .featfunc import FeatureMapLayout, build_layout, eval_phi
from .features import FEATURE_NAMES, AcousticFrameSequence, extract_features
from .model import Model, load_classifier, load_model, save_classifier, save_model
from .train import TrainConfig, TrainingExample, train_full

__version__ = "0.1.0"

__all__ = [
    "AcousticFeatureExtractor", "AcousticFrameSequence", "DecoderConstraints", "EvalReport",
    "FEATURE_NAMES", "FeatureMapLayout", "FrameClassifier", "FrameGrid", "LabeledFrame",
    "LayoutMismatchError", "LossParams", "Model", "ModelFormatError", "NoAdmissiblePairError",
    "PassiveAggressiveFrameClassifier", "SignalTooShortError", "TrainConfig", "TrainingExample",
    "VowelDurationEstimator", "Waveform", "build_layout", "decode", "decode_loss_augmented",
    "eval_phi", "evaluate", "extract_features", "frame_signal", "load_classifier", "load_model",
    "loss", "pearson", "save_classifier", "save_model", "train_full", "train_pa_multiclass",
]
