"""Uncertainty-threshold calibration on validation predictions.

The model's mistakes are the positive class: a sample gets the pseudo-label
1 when the prediction was wrong, 0 when it was right.  Sweeping a threshold
theta over the observed uncertainty values gives an ROC curve (a sample is
"flagged" when u >= theta); the selected theta maximizes

    objective(theta) = coefficient * TPR(theta) - FPR(theta)

with coefficient 2 by default, i.e. catching errors is worth twice what
falsely flagging a correct prediction costs.  Ties go to the largest theta
(flag as few samples as necessary).  Samples with u >= theta are
low-confidence and should be referred / rejected downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import CalibrationError
from .records import Predictions


class Confidence(Enum):
    HIGH = "high_confidence"
    LOW = "low_confidence"


@dataclass(frozen=True)
class ThresholdCalibration:
    """Full sweep (for reporting) plus the selected operating point."""

    candidates: np.ndarray  # ascending candidate thresholds
    tpr: np.ndarray
    fpr: np.ndarray
    objective: np.ndarray
    threshold: float
    tpr_at_threshold: float
    fpr_at_threshold: float
    objective_value: float
    coefficient: float = 2.0

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "coefficient": self.coefficient,
            "tpr_at_threshold": self.tpr_at_threshold,
            "fpr_at_threshold": self.fpr_at_threshold,
            "objective_value": self.objective_value,
            "candidates": self.candidates.tolist(),
            "tpr": self.tpr.tolist(),
            "fpr": self.fpr.tolist(),
            "objective": self.objective.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ThresholdCalibration":
        return cls(
            candidates=np.asarray(d["candidates"], dtype=np.float64),
            tpr=np.asarray(d["tpr"], dtype=np.float64),
            fpr=np.asarray(d["fpr"], dtype=np.float64),
            objective=np.asarray(d["objective"], dtype=np.float64),
            threshold=float(d["threshold"]),
            tpr_at_threshold=float(d["tpr_at_threshold"]),
            fpr_at_threshold=float(d["fpr_at_threshold"]),
            objective_value=float(d["objective_value"]),
            coefficient=float(d["coefficient"]),
        )


def wrong_labels(predicted: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """1 where the prediction disagrees with the label, else 0."""
    predicted = np.asarray(predicted)
    labels = np.asarray(labels)
    if predicted.shape != labels.shape:
        raise ValueError("wrong_labels: shape mismatch")
    return (predicted != labels).astype(np.int64)


def roc_sweep(
    uncertainty: np.ndarray, wrong: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """TPR/FPR of the rule "flag iff u >= theta" over candidate thresholds.

    Candidates are the distinct observed uncertainties plus one sentinel
    just above the maximum (the "flag nothing" operating point).  Requires
    at least one wrong and one correct record; otherwise the rates are
    undefined -> CalibrationError.
    """
    u = np.asarray(uncertainty, dtype=np.float64)
    w = np.asarray(wrong)
    if u.shape != w.shape or u.ndim != 1 or len(u) == 0:
        raise CalibrationError("roc_sweep: need matching 1-d uncertainty/wrong arrays")
    n_wrong = int(np.sum(w == 1))
    n_right = int(np.sum(w == 0))
    if n_wrong == 0 or n_right == 0:
        raise CalibrationError(
            f"roc_sweep: degenerate labels ({n_wrong} wrong, {n_right} correct); "
            "both outcomes are required to trade off TPR against FPR"
        )
    candidates = np.unique(u)
    candidates = np.append(candidates, np.nextafter(candidates[-1], np.inf))
    flagged = u[None, :] >= candidates[:, None]
    tpr = (flagged & (w == 1)).sum(axis=1) / n_wrong
    fpr = (flagged & (w == 0)).sum(axis=1) / n_right
    return candidates, tpr, fpr


def select_threshold(
    candidates: np.ndarray,
    tpr: np.ndarray,
    fpr: np.ndarray,
    coefficient: float = 2.0,
) -> ThresholdCalibration:
    """Pick the candidate maximizing coefficient * TPR - FPR (ties -> largest)."""
    candidates = np.asarray(candidates, dtype=np.float64)
    tpr = np.asarray(tpr, dtype=np.float64)
    fpr = np.asarray(fpr, dtype=np.float64)
    if not (len(candidates) == len(tpr) == len(fpr)) or len(candidates) == 0:
        raise CalibrationError("select_threshold: empty or mismatched sweep")
    objective = coefficient * tpr - fpr
    best = objective.max()
    # candidates are ascending, so the last argmax is the largest threshold
    idx = int(np.flatnonzero(objective == best)[-1])
    return ThresholdCalibration(
        candidates=candidates,
        tpr=tpr,
        fpr=fpr,
        objective=objective,
        threshold=float(candidates[idx]),
        tpr_at_threshold=float(tpr[idx]),
        fpr_at_threshold=float(fpr[idx]),
        objective_value=float(best),
        coefficient=float(coefficient),
    )


def calibrate(preds: Predictions, coefficient: float = 2.0) -> ThresholdCalibration:
    """End-to-end: records -> wrong labels -> sweep -> threshold."""
    wrong = wrong_labels(preds.predicted, preds.labels)
    candidates, tpr, fpr = roc_sweep(preds.uncertainty, wrong)
    return select_threshold(candidates, tpr, fpr, coefficient)


def confidence_of(uncertainty: float, threshold: float) -> Confidence:
    """Boundary convention: u >= theta is LOW confidence (refer/reject)."""
    return Confidence.LOW if uncertainty >= threshold else Confidence.HIGH


def low_confidence_mask(uncertainty: np.ndarray, threshold: float) -> np.ndarray:
    return np.asarray(uncertainty, dtype=np.float64) >= threshold
