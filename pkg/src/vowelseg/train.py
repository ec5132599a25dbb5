"""Structured PA initialization and direct-loss-minimization training."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .decode import CandidateSet, DecoderConstraints, LossParams, decode, loss
from .featfunc import (STD_FLOOR, CompiledLayout, DurationPriorParams, FeatureMapLayout,
                       Normalization, build_layout, fit_duration_priors)
from .features import AcousticFrameSequence
from .model import Model

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingExample:
    seq: AcousticFrameSequence
    target: tuple
    id: str = ""
    context: Optional[tuple] = None


@dataclass(frozen=True)
class TrainConfig:
    eta0: float = 0.1
    epsilon: float = -1.36
    tau_b: float = 1
    tau_e: float = 2
    pa_C: float = 0.5
    pa_epochs: int = 100
    dlm_iters: Optional[int] = None  # None: 20 x training examples
    seed: int = 0
    dev_fraction: float = 0.1
    report_every: int = 100
    constraints: DecoderConstraints = field(default_factory=DecoderConstraints)

    def __post_init__(self):
        if self.eta0 <= 0:
            raise ValueError("eta0 must be positive")
        if self.epsilon == 0:
            raise ValueError("epsilon must be non-zero")
        if self.pa_C <= 0:
            raise ValueError("pa_C must be positive")
        if self.pa_epochs < 0:
            raise ValueError("pa_epochs must be >= 0")
        if not 0 <= self.dev_fraction < 1:
            raise ValueError("dev_fraction must lie in [0, 1)")

    @property
    def loss_params(self) -> LossParams:
        return LossParams(self.tau_b, self.tau_e)


class _Workspace:
    """Candidate tables for each example, built once per training run."""

    def __init__(self, data, layout, priors, constraints):
        compiled = CompiledLayout(layout)
        self.sets = [CandidateSet(ex.seq, layout, priors, constraints, compiled) for ex in data]


def check_admissible(data: Sequence[TrainingExample], constraints: DecoderConstraints) -> None:
    bad = [ex.id or str(i) for i, ex in enumerate(data)
           if not constraints.admissible(len(ex.seq), ex.target)]
    if bad:
        raise ValueError(f"targets violate decoder constraints for examples: {bad[:10]}"
                         + (" ..." if len(bad) > 10 else ""))


def fit_normalization(data: Sequence[TrainingExample], layout: FeatureMapLayout,
                      priors: DurationPriorParams,
                      constraints: DecoderConstraints = DecoderConstraints(),
                      workspace: _Workspace | None = None) -> Normalization:
    """Mean and (population) std of phi at every target pair; std floored."""
    if len(data) < 2:
        raise ValueError("need at least two examples to fit normalization")
    ws = workspace or _Workspace(data, layout, priors, constraints)
    phis = np.array([cs.phi(ex.target) for cs, ex in zip(ws.sets, data)])
    mean = phis.mean(axis=0)
    std = np.maximum(phis.std(axis=0), STD_FLOOR)
    return Normalization(mean, std)


def train_pa_structured(data: Sequence[TrainingExample], layout: FeatureMapLayout,
                        priors: DurationPriorParams, normalization: Normalization,
                        cfg: TrainConfig, workspace: _Workspace | None = None,
                        w_init=None, debug: bool = False) -> np.ndarray:
    """Averaged structured PA-I with cost-augmented inference.

    Each step predicts ``argmax w.phi + loss`` and, on a positive hinge
    ``w.phi(pred) - w.phi(target) + sqrt(loss)``, moves ``w`` along
    ``phi(target) - phi(pred)`` by ``min(C, hinge / ||diff||^2)``.
    Returns the mean of ``w`` after every step.
    """
    if not data:
        raise ValueError("no training data")
    ws = workspace or _Workspace(data, layout, priors, cfg.constraints)
    p = cfg.loss_params
    std = normalization.std
    w = np.zeros(layout.n) if w_init is None else np.array(w_init, dtype=np.float64)
    total = np.zeros_like(w)
    steps = 0
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.pa_epochs):
        for i in rng.permutation(len(data)):
            ex, cs = data[i], ws.sets[i]
            S = cs.score_matrix(w / std) + cs.loss_matrix(ex.target, p)
            pred = cs.best(S)
            gamma = loss(ex.target, pred, p)
            if gamma > 0:
                diff = (cs.phi(ex.target) - cs.phi(pred)) / std
                hinge = -float(w @ diff) + math.sqrt(gamma)
                sq = float(diff @ diff)
                if hinge > 0 and sq > 0:
                    tau = min(cfg.pa_C, hinge / sq)
                    w += tau * diff
                    if debug and tau < cfg.pa_C:
                        after = -float(w @ diff) + math.sqrt(gamma)
                        assert abs(after) <= 1e-8 * max(1.0, math.sqrt(gamma)), after
            total += w
            steps += 1
    if steps == 0:
        return w
    return total / steps


def dlm_step(w: np.ndarray, phi_pred: np.ndarray, phi_aug: np.ndarray,
             eta0: float, epsilon: float, t: int) -> np.ndarray:
    """``w + eta0 / (epsilon * sqrt(t)) * (phi_pred - phi_aug)``; epsilon keeps its sign."""
    return w + (eta0 / (epsilon * math.sqrt(t))) * (phi_pred - phi_aug)


def mean_loss(data, model: Model, p: LossParams, workspace: _Workspace | None = None) -> float:
    if not data:
        return float("nan")
    sets = workspace.sets if workspace else [None] * len(data)
    return float(np.mean([loss(ex.target, decode(ex.seq, model, cs)[0], p)
                          for ex, cs in zip(data, sets)]))


def train_dlm(data: Sequence[TrainingExample], layout: FeatureMapLayout,
              priors: DurationPriorParams, normalization: Normalization,
              w_init, cfg: TrainConfig, dev: Sequence[TrainingExample] = (),
              workspace: _Workspace | None = None, dev_workspace: _Workspace | None = None,
              report: Callable[[str], None] | None = None) -> Model:
    """SGD on the task loss with the loss-augmented perturbation.

    Returns a model holding the average of the iterates w_1..w_T.
    """
    if not data:
        raise ValueError("no training data")
    w = np.array(w_init, dtype=np.float64)
    if w.shape != (layout.n,):
        raise ValueError(f"w_init must have dimension {layout.n}")
    ws = workspace or _Workspace(data, layout, priors, cfg.constraints)
    if dev and dev_workspace is None:
        dev_workspace = _Workspace(dev, layout, priors, cfg.constraints)
    p = cfg.loss_params
    std = normalization.std
    iters = cfg.dlm_iters if cfg.dlm_iters is not None else 20 * len(data)
    rng = np.random.default_rng(cfg.seed + 1)

    def package(weights):
        return Model(w=weights, layout=layout, priors=priors, normalization=normalization,
                     constraints=cfg.constraints, loss_params=p,
                     provenance=_provenance(cfg, iters), w_pa=np.array(w_init, dtype=np.float64))

    total = np.zeros_like(w)
    recent = []
    for t in range(1, iters + 1):
        i = int(rng.integers(len(data)))
        ex, cs = data[i], ws.sets[i]
        S = cs.score_matrix(w / std)
        pred = cs.best(S)
        aug = cs.best(S + cfg.epsilon * cs.loss_matrix(ex.target, p))
        recent.append(loss(ex.target, pred, p))
        total += w
        if pred != aug:
            w = dlm_step(w, cs.phi(pred) / std, cs.phi(aug) / std, cfg.eta0, cfg.epsilon, t)
        if report is not None and cfg.report_every and t % cfg.report_every == 0:
            dev_loss = mean_loss(dev, package(total / t), p, dev_workspace) if dev else float("nan")
            report(f"iter={t} dev_loss={dev_loss:.4f} train_loss={np.mean(recent):.4f}")
            recent = []
    return package(total / iters if iters else w)


def _provenance(cfg: TrainConfig, iters: int) -> dict:
    return {
        "eta0": cfg.eta0, "epsilon": cfg.epsilon, "pa_C": cfg.pa_C,
        "pa_epochs": cfg.pa_epochs, "dlm_iters": iters, "seed": cfg.seed,
        "tau_b": cfg.tau_b, "tau_e": cfg.tau_e, "dev_fraction": cfg.dev_fraction,
        "pa_inference": "cost-augmented (+loss), margin sqrt(loss)",
        "dlm_average": "iterates 1..T",
        "normalization": "z-score at targets",
    }


def split_dev(data: Sequence[TrainingExample], fraction: float, seed: int):
    """Seeded hold-out split; returns ``(train, dev)``."""
    m = len(data)
    n_dev = int(round(fraction * m)) if m > 2 else 0
    n_dev = min(n_dev, m - 2)
    order = np.random.default_rng(seed).permutation(m)
    dev_idx = set(order[:n_dev].tolist())
    train = [ex for i, ex in enumerate(data) if i not in dev_idx]
    dev = [ex for i, ex in enumerate(data) if i in dev_idx]
    return train, dev


def train_full(data: Sequence[TrainingExample], cfg: TrainConfig = TrainConfig(),
               with_classifier: bool = False, classifier=None,
               report: Callable[[str], None] | None = None) -> Model:
    """Priors, layout, normalization, PA initialization, then DLM."""
    data = list(data)
    if not data:
        raise ValueError("no training data")
    check_admissible(data, cfg.constraints)
    train, dev = split_dev(data, cfg.dev_fraction, cfg.seed)
    priors = fit_duration_priors([ex.target[1] - ex.target[0] for ex in train])
    layout = build_layout(with_classifier)
    ws = _Workspace(train, layout, priors, cfg.constraints)
    norm = fit_normalization(train, layout, priors, cfg.constraints, ws)
    log.info("layout n=%d fingerprint=%s train=%d dev=%d",
             layout.n, layout.fingerprint, len(train), len(dev))
    w_pa = train_pa_structured(train, layout, priors, norm, cfg, ws)
    dev_ws = _Workspace(dev, layout, priors, cfg.constraints) if dev else None
    model = train_dlm(train, layout, priors, norm, w_pa, cfg, dev=dev, workspace=ws,
                      dev_workspace=dev_ws, report=report)
    if classifier is not None:
        model = replace(model, classifier=classifier)
    return model
