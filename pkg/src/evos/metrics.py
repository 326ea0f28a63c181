"""Classification metrics: confusion matrix, one-vs-rest per-class scores,
rank-based AUC, OOD detection rate, and the thresholded evaluation protocol
(low-confidence samples are referred and excluded from the metrics).

Conventions:
    * confusion rows are true classes, columns are predicted classes;
    * 0/0 ratios are defined as 0;
    * classes absent from both truth and prediction (TP+FP+FN = 0) are
      excluded from macro averages;
    * AUC uses Mann-Whitney midranks, so ties count 1/2.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .records import Predictions


def _safe_div(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den != 0)
    return out


def confusion_matrix(predicted: np.ndarray, labels: np.ndarray, n_classes: int) -> np.ndarray:
    """(K, K) count matrix; rows = true class, cols = predicted class."""
    predicted = np.asarray(predicted, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if predicted.shape != labels.shape:
        raise ValueError("confusion_matrix: shape mismatch")
    for name, idx in (("labels", labels), ("predictions", predicted)):
        if idx.size and (idx.min() < 0 or idx.max() >= n_classes):
            raise ValueError(f"confusion_matrix: {name} outside 0..K-1")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (labels, predicted), 1)
    return cm


@dataclass(frozen=True)
class PerClassMetrics:
    """One-vs-rest scores per class plus macro averages over included classes."""

    precision: np.ndarray
    sensitivity: np.ndarray
    specificity: np.ndarray
    f1: np.ndarray
    support: np.ndarray  # true count per class
    included: np.ndarray  # bool; TP+FP+FN > 0
    macro_precision: float
    macro_sensitivity: float
    macro_specificity: float
    macro_f1: float

    def to_dict(self) -> dict:
        return {
            "precision": self.precision.tolist(),
            "sensitivity": self.sensitivity.tolist(),
            "specificity": self.specificity.tolist(),
            "f1": self.f1.tolist(),
            "support": self.support.tolist(),
            "included": self.included.tolist(),
            "macro_precision": self.macro_precision,
            "macro_sensitivity": self.macro_sensitivity,
            "macro_specificity": self.macro_specificity,
            "macro_f1": self.macro_f1,
        }


def per_class_metrics(cm: np.ndarray) -> PerClassMetrics:
    cm = np.asarray(cm, dtype=np.int64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.size == 0:
        raise ValueError("per_class_metrics: need a non-empty square matrix")
    total = cm.sum()
    tp = np.diag(cm).astype(np.float64)
    fn = cm.sum(axis=1) - tp
    fp = cm.sum(axis=0) - tp
    tn = total - tp - fn - fp
    precision = _safe_div(tp, tp + fp)
    sensitivity = _safe_div(tp, tp + fn)
    specificity = _safe_div(tn, tn + fp)
    f1 = _safe_div(2.0 * precision * sensitivity, precision + sensitivity)
    included = (tp + fp + fn) > 0
    if not np.any(included):
        macro = (0.0, 0.0, 0.0, 0.0)
    else:
        macro = (
            float(precision[included].mean()),
            float(sensitivity[included].mean()),
            float(specificity[included].mean()),
            float(f1[included].mean()),
        )
    return PerClassMetrics(
        precision=precision,
        sensitivity=sensitivity,
        specificity=specificity,
        f1=f1,
        support=(tp + fn).astype(np.int64),
        included=included,
        macro_precision=macro[0],
        macro_sensitivity=macro[1],
        macro_specificity=macro[2],
        macro_f1=macro[3],
    )


def _midranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x), dtype=np.float64)
    sorted_x = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def binary_auc(scores: np.ndarray, positives: np.ndarray) -> float:
    """Mann-Whitney AUC of scores for separating positives from negatives."""
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    n_neg = len(positives) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("binary_auc: need both positives and negatives")
    ranks = _midranks(scores)
    return float(
        (ranks[positives].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    )


def ovr_auc(labels: np.ndarray, probs: np.ndarray) -> tuple[float, np.ndarray]:
    """Macro one-vs-rest AUC over classes with both positives and negatives.

    Returns (macro, per_class) with NaN for skipped classes (a warning
    names them).
    """
    labels = np.asarray(labels, dtype=np.int64)
    probs = np.asarray(probs, dtype=np.float64)
    k = probs.shape[1]
    per_class = np.full(k, np.nan)
    for cls in range(k):
        pos = labels == cls
        if pos.all() or not pos.any():
            warnings.warn(f"ovr_auc: class {cls} lacks positives or negatives; skipped")
            continue
        per_class[cls] = binary_auc(probs[:, cls], pos)
    usable = ~np.isnan(per_class)
    if not usable.any():
        raise ValueError("ovr_auc: no class has both positives and negatives")
    return float(per_class[usable].mean()), per_class


def ood_detection_rate(uncertainty: np.ndarray, threshold: float) -> float:
    """Fraction of samples flagged as low confidence (u >= theta)."""
    u = np.asarray(uncertainty, dtype=np.float64)
    if len(u) == 0:
        raise ValueError("ood_detection_rate: empty input")
    return float(np.mean(u >= threshold))


@dataclass(frozen=True)
class MetricReport:
    """Metrics over the evaluated subset of a prediction batch.

    When every sample is referred (n_evaluated == 0) the metric fields are
    None and ``available`` is False; the referral bookkeeping still holds.
    """

    n_total: int
    n_evaluated: int
    n_referred: int
    referral_rate: float
    available: bool
    confusion: np.ndarray | None = None
    per_class: PerClassMetrics | None = None
    macro_auc: float | None = None
    auc_per_class: np.ndarray | None = None
    accuracy: float | None = None

    def to_dict(self) -> dict:
        out = {
            "n_total": self.n_total,
            "n_evaluated": self.n_evaluated,
            "n_referred": self.n_referred,
            "referral_rate": self.referral_rate,
            "available": self.available,
        }
        if self.available:
            out["confusion"] = self.confusion.tolist()
            out["per_class"] = self.per_class.to_dict()
            out["macro_auc"] = self.macro_auc
            out["auc_per_class"] = [
                None if np.isnan(v) else float(v) for v in self.auc_per_class
            ]
            out["accuracy"] = self.accuracy
        return out


def evaluate(preds: Predictions, threshold: float | None = None) -> MetricReport:
    """Full report; with a threshold, low-confidence rows are referred first.

    All rows must be in-distribution (labels >= 0); OOD detection is a
    separate protocol (``ood_detection_rate``).
    """
    if np.any(preds.labels < 0):
        raise ValueError("evaluate: OOD rows in a classification report")
    n_total = len(preds)
    if threshold is None:
        kept = preds
        n_referred = 0
    else:
        low = preds.uncertainty >= threshold
        kept = preds.subset(~low)
        n_referred = int(low.sum())
    n_eval = len(kept)
    if n_eval == 0:
        return MetricReport(
            n_total=n_total,
            n_evaluated=0,
            n_referred=n_referred,
            referral_rate=n_referred / n_total if n_total else 0.0,
            available=False,
        )
    cm = confusion_matrix(kept.predicted, kept.labels, kept.n_classes)
    per_class = per_class_metrics(cm)
    try:
        macro_auc, auc_per_class = ovr_auc(kept.labels, kept.probs)
    except ValueError:
        macro_auc, auc_per_class = None, np.full(kept.n_classes, np.nan)
    return MetricReport(
        n_total=n_total,
        n_evaluated=n_eval,
        n_referred=n_referred,
        referral_rate=n_referred / n_total,
        available=True,
        confusion=cm,
        per_class=per_class,
        macro_auc=macro_auc,
        auc_per_class=auc_per_class,
        accuracy=float(np.mean(kept.predicted == kept.labels)),
    )
