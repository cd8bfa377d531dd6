"""Point and probabilistic evaluation metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bayes import Trace, map_estimate
from .errors import EmptyTrace, LengthMismatch, NoPositives, SingleClass, SingleDraw


def _pair(pred, target):
    pred = np.asarray(pred, dtype=float).ravel()
    target = np.asarray(target, dtype=float).ravel()
    if pred.shape != target.shape:
        raise LengthMismatch(f"{pred.size} predictions for {target.size} targets")
    if pred.size == 0:
        raise LengthMismatch("metrics need at least one value")
    return pred, target


def mse(pred, target) -> float:
    p, t = _pair(pred, target)
    return float(np.mean((p - t) ** 2))


def mae(pred, target) -> float:
    p, t = _pair(pred, target)
    return float(np.mean(np.abs(p - t)))


def waic(pointwise_loglik) -> float:
    """WAIC on the deviance scale from a (draws, points) log-likelihood matrix.

    ``lppd`` uses a log-sum-exp over draws; the effective number of
    parameters is the per-point sample variance (n - 1 denominator).
    """
    ll = np.asarray(pointwise_loglik, dtype=float)
    if ll.ndim != 2:
        raise ValueError("expected a (draws, points) matrix")
    s = ll.shape[0]
    if s < 2:
        raise SingleDraw("WAIC needs at least two draws")
    top = ll.max(axis=0)
    lppd = np.sum(top + np.log(np.mean(np.exp(ll - top), axis=0)))
    p_waic = np.sum(np.var(ll, axis=0, ddof=1))
    return float(-2.0 * (lppd - p_waic))


def _labels(labels):
    y = np.asarray(labels, dtype=float).ravel()
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    return y


def classification_metrics(prob, labels, threshold: float = 0.5):
    """``(accuracy, sensitivity)``; class 1 is predicted when prob >= threshold."""
    p, y = _pair(prob, labels)
    y = _labels(y)
    pred = (p >= threshold).astype(float)
    accuracy = float(np.mean(pred == y))
    positives = y == 1
    if not positives.any():
        raise NoPositives("sensitivity is undefined without positive labels")
    sensitivity = float(np.mean(pred[positives] == 1))
    return accuracy, sensitivity


def roc_auc(prob, labels):
    """Trapezoidal AUC and the ROC points (fpr, tpr), one per distinct score.

    Thresholds sweep the unique scores from high to low, so tied scores
    enter together and the area equals the normalized Mann-Whitney statistic.
    """
    p, y = _pair(prob, labels)
    y = _labels(y)
    n1 = int(np.sum(y == 1))
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        raise SingleClass("ROC needs both classes")
    order = np.argsort(-p, kind="stable")
    p, y = p[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(p) != 0), p.size - 1]
    tp = np.cumsum(y)[last]
    fp = (last + 1) - tp
    tpr = np.r_[0.0, tp / n1]
    fpr = np.r_[0.0, fp / n0]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return auc, np.column_stack([fpr, tpr])


def posterior_summary(trace: Trace) -> dict:
    """Per-parameter pooled mean and sd (n - 1) plus the MAP value."""
    if trace.samples.size == 0:
        raise EmptyTrace("trace holds no draws")
    pooled = trace.pooled()
    theta_map = map_estimate(trace)
    sd = pooled.std(axis=0, ddof=1) if pooled.shape[0] > 1 else np.zeros(pooled.shape[1])
    return {
        name: {"mean": float(pooled[:, i].mean()), "sd": float(sd[i]), "map": float(theta_map[i])}
        for i, name in enumerate(trace.names)
    }


@dataclass
class MetricsReport:
    """Metric tables per model, with a note on what they were computed against.

    ``against`` says whether errors use the noiseless truth or the observed
    data.
    """

    values: dict = field(default_factory=dict)  # model -> {metric -> value}
    against: str = "observed"
    meta: dict = field(default_factory=dict)

    def add(self, model: str, metrics: dict):
        for k, v in metrics.items():
            if not math.isfinite(v):
                raise ValueError(f"{model}/{k} is not finite")
        self.values[model] = dict(metrics)

    def table(self) -> str:
        models = list(self.values)
        names = []
        for m in models:
            names += [k for k in self.values[m] if k not in names]
        width = max([len("metric")] + [len(n) for n in names])
        cols = [max(len(m), 12) for m in models]
        lines = [f"# errors against: {self.against}"]
        lines += [f"# {k}: {v}" for k, v in self.meta.items()]
        lines.append("  ".join(["metric".ljust(width)] + [m.rjust(w) for m, w in zip(models, cols)]))
        for n in names:
            cells = [
                (f"{self.values[m][n]:.6g}" if n in self.values[m] else "-").rjust(w)
                for m, w in zip(models, cols)
            ]
            lines.append("  ".join([n.ljust(width)] + cells))
        return "\n".join(lines) + "\n"

    def dumps(self) -> str:
        """Machine-readable ``model,metric,value`` lines (repr floats)."""
        lines = [f"# against={self.against}"]
        lines += [f"# {k}={v}" for k, v in self.meta.items()]
        lines.append("model,metric,value")
        for m, vals in self.values.items():
            lines += [f"{m},{k},{v!r}" for k, v in vals.items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "MetricsReport":
        rep = cls()
        for line in text.splitlines():
            if line.startswith("# against="):
                rep.against = line.split("=", 1)[1]
            elif line.startswith("# "):
                k, _, v = line[2:].partition("=")
                rep.meta[k] = v
            elif line and line != "model,metric,value":
                m, k, v = line.rsplit(",", 2)
                rep.values.setdefault(m, {})[k] = float(v)
        return rep
