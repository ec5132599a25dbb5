"""Trained model and the ``VSEG1`` container format.

Layout on disk::

    b"VSEG1" | u32 version | u32 header length | UTF-8 JSON header | f64 payload

All integers and floats in the binary part are little-endian.  The JSON
header names the payload arrays and their lengths in order; every numeric
model parameter lives in the payload, the header only carries structure and
training provenance.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .classifier import MFCC_DIM, FrameClassifier
from .decode import DecoderConstraints, LossParams
from .errors import LayoutMismatchError, ModelFormatError
from .featfunc import DurationPriorParams, FeatureMapLayout, Normalization, build_layout

MAGIC = b"VSEG1"
VERSION = 1


@dataclass(frozen=True)
class Model:
    w: np.ndarray
    layout: FeatureMapLayout
    priors: DurationPriorParams
    normalization: Normalization
    constraints: DecoderConstraints = DecoderConstraints()
    loss_params: LossParams = LossParams()
    provenance: dict = field(default_factory=dict)
    classifier: FrameClassifier | None = None
    w_pa: np.ndarray | None = None
    fingerprint: str = ""

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if w.shape != (self.layout.n,):
            raise ValueError(f"weight dimension {w.shape} != layout n={self.layout.n}")
        if self.normalization.mean.shape != w.shape:
            raise ValueError("normalization table does not match layout")
        object.__setattr__(self, "w", w)
        if self.w_pa is not None:
            object.__setattr__(self, "w_pa", np.asarray(self.w_pa, dtype=np.float64))
        if not self.fingerprint:
            object.__setattr__(self, "fingerprint", self.layout.fingerprint)

    def with_weights(self, w) -> "Model":
        return replace(self, w=np.asarray(w, dtype=np.float64))

    # -- serialization -------------------------------------------------
    def to_bytes(self) -> bytes:
        arrays = [("w", self.w),
                  ("norm_mean", self.normalization.mean),
                  ("norm_std", self.normalization.std),
                  ("priors", np.array([self.priors.mu_hat, self.priors.sigma2_hat,
                                       self.priors.k_hat, self.priors.theta_hat])),
                  ("loss_params", np.array([self.loss_params.tau_b, self.loss_params.tau_e],
                                           dtype=np.float64))]
        if self.w_pa is not None:
            arrays.append(("w_pa", self.w_pa))
        header = {
            "fingerprint": self.fingerprint,
            "n": self.layout.n,
            "with_classifier": self.layout.classifier_features_included,
            "constraints": {
                "margin_before": self.constraints.margin_before,
                "margin_after": self.constraints.margin_after,
                "min_duration": self.constraints.min_duration,
                "max_duration": self.constraints.max_duration,
            },
            "provenance": self.provenance,
        }
        if self.classifier is not None:
            header["classifier"] = _classifier_header(self.classifier)
            arrays.append(("classifier_weights", self.classifier.weights.ravel()))
        return _pack(header, arrays)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Model":
        header, arrays = _unpack(data)
        if header.get("kind", "model") != "model":
            raise ModelFormatError(f"file holds a {header['kind']}, not a model")
        layout = build_layout(header["with_classifier"])
        if layout.fingerprint != header["fingerprint"]:
            raise LayoutMismatchError(
                f"stored fingerprint {header['fingerprint']} != current {layout.fingerprint}")
        n = header["n"]
        if layout.n != n or any(arrays[k].size != n for k in ("w", "norm_mean", "norm_std")):
            raise ModelFormatError("dimension mismatch between header, layout and payload")

        classifier = None
        if "classifier" in header:
            classifier = _classifier_from(header["classifier"], arrays["classifier_weights"])
        mu, s2, k, theta = arrays["priors"]
        tau_b, tau_e = arrays["loss_params"]
        return cls(
            w=arrays["w"],
            layout=layout,
            priors=DurationPriorParams(float(mu), float(s2), float(k), float(theta)),
            normalization=Normalization(arrays["norm_mean"], arrays["norm_std"]),
            constraints=DecoderConstraints(**header["constraints"]),
            loss_params=LossParams(float(tau_b), float(tau_e)),
            provenance=header["provenance"],
            classifier=classifier,
            w_pa=arrays.get("w_pa"),
            fingerprint=header["fingerprint"],
        )


def _pack(header: dict, arrays) -> bytes:
    header = dict(header, arrays=[[name, int(a.size)] for name, a in arrays])
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(np.asarray(a, dtype="<f8").tobytes() for _, a in arrays)
    return MAGIC + struct.pack("<II", VERSION, len(blob)) + blob + payload


def _unpack(data: bytes) -> tuple[dict, dict]:
    if data[:len(MAGIC)] != MAGIC:
        raise ModelFormatError("not a VSEG1 file (bad magic)")
    off = len(MAGIC)
    if len(data) < off + 8:
        raise ModelFormatError("truncated header")
    version, hlen = struct.unpack_from("<II", data, off)
    if version != VERSION:
        raise ModelFormatError(f"unsupported container version {version}")
    off += 8
    try:
        header = json.loads(data[off:off + hlen].decode("utf-8"))
    except ValueError as exc:
        raise ModelFormatError(f"corrupt header: {exc}") from exc
    off += hlen
    arrays = {}
    for name, size in header.get("arrays", ()):
        end = off + 8 * size
        if end > len(data):
            raise ModelFormatError("truncated payload")
        arrays[name] = np.frombuffer(data[off:end], dtype="<f8").astype(np.float64)
        off = end
    if off != len(data):
        raise ModelFormatError("trailing bytes after payload")
    return header, arrays


def _classifier_header(clf: FrameClassifier) -> dict:
    return {"class_names": list(clf.class_names), "vowel_set": sorted(clf.vowel_set),
            "nasal_set": sorted(clf.nasal_set)}


def _classifier_from(meta: dict, weights: np.ndarray) -> FrameClassifier:
    k = len(meta["class_names"])
    if weights.size != k * MFCC_DIM:
        raise ModelFormatError("classifier weight size mismatch")
    return FrameClassifier(tuple(meta["class_names"]), frozenset(meta["vowel_set"]),
                           frozenset(meta["nasal_set"]), weights.reshape(k, MFCC_DIM))


def classifier_to_bytes(clf: FrameClassifier, provenance: dict | None = None) -> bytes:
    """A classifier on its own, in the same container."""
    header = {"kind": "classifier", "classifier": _classifier_header(clf),
              "provenance": provenance or {}}
    return _pack(header, [("classifier_weights", clf.weights.ravel())])


def classifier_from_bytes(data: bytes) -> FrameClassifier:
    """Reads a classifier file, or the classifier embedded in a model file."""
    header, arrays = _unpack(data)
    if "classifier" not in header:
        raise ModelFormatError("file holds no frame classifier")
    return _classifier_from(header["classifier"], arrays["classifier_weights"])


def save_model(model: Model, path) -> None:
    Path(path).write_bytes(model.to_bytes())


def load_model(path) -> Model:
    return Model.from_bytes(Path(path).read_bytes())


def save_classifier(clf: FrameClassifier, path, provenance: dict | None = None) -> None:
    Path(path).write_bytes(classifier_to_bytes(clf, provenance))


def load_classifier(path) -> FrameClassifier:
    return classifier_from_bytes(Path(path).read_bytes())
