"""Boundary-deviation metrics against manual annotations."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

ONSET_THRESHOLD_MS = 20.0
OFFSET_THRESHOLD_MS = 50.0


class UndefinedCorrelationError(ValueError):
    pass


def pearson(x, y) -> float:
    """Sample Pearson correlation."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("pearson needs two equal-length sequences of at least 2 values")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("correlation undefined: zero variance")
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0))


@dataclass(frozen=True)
class TokenResult:
    id: str
    pred: tuple
    target: tuple
    onset_dev_ms: float
    offset_dev_ms: float
    duration_pred_ms: float
    duration_target_ms: float
    context: Optional[tuple] = None


@dataclass
class EvalReport:
    per_token: list
    mean_onset_dev_ms: float
    mean_offset_dev_ms: float
    pct_onset_outside_20ms: float
    pct_offset_outside_50ms: float
    pearson_r: Optional[float]
    correlation_omitted: bool = False
    per_context_mean_duration_dev_ms: dict = field(default_factory=dict)
    by_onset_context: dict = field(default_factory=dict)
    by_coda_context: dict = field(default_factory=dict)
    hop: float = 0.005

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["token_id", "pred_onset_s", "pred_offset_s", "target_onset_s",
                         "target_offset_s", "onset_dev_ms", "offset_dev_ms",
                         "duration_pred_ms", "duration_target_ms", "onset_context",
                         "coda_context"])
        for r in self.per_token:
            ctx = r.context or ("", "")
            writer.writerow([r.id,
                             *(f"{(t - 1) * self.hop:.6f}" for t in (*r.pred, *r.target)),
                             f"{r.onset_dev_ms:.3f}", f"{r.offset_dev_ms:.3f}",
                             f"{r.duration_pred_ms:.3f}", f"{r.duration_target_ms:.3f}",
                             ctx[0], ctx[1]])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [
            f"tokens: {len(self.per_token)}",
            f"{'':28s}{'onset':>10s}{'offset':>10s}",
            f"{'mean deviation [ms]':28s}{self.mean_onset_dev_ms:10.2f}{self.mean_offset_dev_ms:10.2f}",
            f"{'outside 20 / 50 ms [%]':28s}{self.pct_onset_outside_20ms:10.2f}"
            f"{self.pct_offset_outside_50ms:10.2f}",
        ]
        if self.correlation_omitted:
            lines.append("duration correlation: omitted (fewer than 2 tokens or zero variance)")
        else:
            lines.append(f"duration correlation: r({len(self.per_token) - 2}) = {self.pearson_r:.4f}")
        if self.per_context_mean_duration_dev_ms:
            lines.append("mean |duration deviation| [ms] by context (onset / coda):")
            for (a, b), v in sorted(self.per_context_mean_duration_dev_ms.items()):
                lines.append(f"  {a + ' / ' + b:36s}{v:10.2f}")
            for title, table in (("onset", self.by_onset_context), ("coda", self.by_coda_context)):
                for k in sorted(table):
                    lines.append(f"  {title + ' ' + k + ' (all)':36s}{table[k]:10.2f}")
        return "\n".join(lines) + "\n"


def evaluate(predictions: Mapping, targets: Mapping, hop: float = 0.005,
             contexts: Mapping | None = None) -> EvalReport:
    """Compare predicted and target ``(t_b, t_e)`` frames keyed by token id.

    Deviations use the untolerant per-boundary loss; a boundary is
    "outside" only when strictly beyond the threshold.
    """
    if set(predictions) != set(targets):
        missing = sorted(set(predictions) ^ set(targets))
        raise ValueError(f"token ids differ between predictions and targets: {missing[:5]}")
    if not targets:
        raise ValueError("nothing to evaluate")
    contexts = contexts or {}
    hop_ms = hop * 1000.0
    tokens = []
    for tid in sorted(targets):
        p, t = tuple(predictions[tid]), tuple(targets[tid])
        tokens.append(TokenResult(
            id=tid, pred=p, target=t,
            onset_dev_ms=abs(p[0] - t[0]) * hop_ms,
            offset_dev_ms=abs(p[1] - t[1]) * hop_ms,
            duration_pred_ms=(p[1] - p[0]) * hop_ms,
            duration_target_ms=(t[1] - t[0]) * hop_ms,
            context=contexts.get(tid)))

    on = np.array([r.onset_dev_ms for r in tokens])
    off = np.array([r.offset_dev_ms for r in tokens])
    dp = np.array([r.duration_pred_ms for r in tokens])
    dt = np.array([r.duration_target_ms for r in tokens])
    try:
        r = pearson(dp, dt)
        omitted = False
    except ValueError:
        r, omitted = None, True

    def group(key):
        acc = defaultdict(list)
        for tok in tokens:
            if tok.context is not None:
                acc[key(tok.context)].append(abs(tok.duration_pred_ms - tok.duration_target_ms))
        return {k: float(np.mean(v)) for k, v in acc.items()}

    return EvalReport(
        per_token=tokens,
        mean_onset_dev_ms=float(on.mean()),
        mean_offset_dev_ms=float(off.mean()),
        pct_onset_outside_20ms=100.0 * float(np.mean(on > ONSET_THRESHOLD_MS)),
        pct_offset_outside_50ms=100.0 * float(np.mean(off > OFFSET_THRESHOLD_MS)),
        pearson_r=r,
        correlation_omitted=omitted,
        per_context_mean_duration_dev_ms=group(lambda c: tuple(c)),
        by_onset_context=group(lambda c: c[0]),
        by_coda_context=group(lambda c: c[1]),
        hop=hop,
    )
