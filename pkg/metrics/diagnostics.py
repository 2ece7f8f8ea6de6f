"""
Quality measures of the pseudo-labels on an unlabeled batch: purity (how
many predictions are confident), reliability (how many confident
predictions are right) and top-k accuracy.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from losses.terms import LossReport


def _probabilities(preds) -> np.ndarray:
    q = preds.q if hasattr(preds, 'q') else np.asarray(preds)
    assert q.ndim == 2, q.shape
    return q


def purity(preds, threshold: float) -> float:
    q = _probabilities(preds)
    if q.shape[0] == 0:
        raise ValueError("Purity of an empty batch")
    return float(np.mean(q.max(axis=1) >= threshold))


def reliability(preds, labels: np.ndarray, threshold: float) -> Optional[float]:
    """Accuracy among the samples reaching `threshold`; None if there are none."""
    q = _probabilities(preds)
    confident = q.max(axis=1) >= threshold
    if not confident.any():
        return None
    correct = np.argmax(q, axis=1) == np.asarray(labels)
    return float(np.mean(correct[confident]))


def topk_accuracy(preds, labels: np.ndarray, k: int) -> float:
    """
    Fraction of samples whose label is among the k most probable classes.
    Equal probabilities rank the lower class index first.
    """
    q = _probabilities(preds)
    if not 1 <= k <= q.shape[1]:
        raise ValueError(f"k must lie in [1, {q.shape[1]}], got {k}")
    if q.shape[0] == 0:
        raise ValueError("Accuracy of an empty batch")
    ranking = np.argsort(-q, axis=1, kind='stable')[:, :k]
    hits = (ranking == np.asarray(labels)[:, None]).any(axis=1)
    return float(np.mean(hits))


@dataclass(frozen=True)
class DiagnosticRow:
    iteration: int
    loss: LossReport
    purity: Optional[float]
    reliability: Optional[float]
    top1: Optional[float]
    top2: Optional[float]
    test_error: Optional[float]
    threshold_global: float
    wall_clock_s: float

    @classmethod
    def measure(
        cls,
        iteration: int,
        loss: LossReport,
        preds,
        labels: Optional[np.ndarray],
        purity_threshold: float,
        threshold_global: float,
        wall_clock_s: float,
        test_error: Optional[float] = None,
    ) -> 'DiagnosticRow':
        """`preds` are the weak-view predictions of the unlabeled batch, or None."""
        if preds is None or len(preds) == 0 or labels is None:
            p = r = t1 = t2 = None
        else:
            p = purity(preds, purity_threshold)
            r = reliability(preds, labels, purity_threshold)
            t1 = topk_accuracy(preds, labels, 1)
            t2 = topk_accuracy(preds, labels, min(2, _probabilities(preds).shape[1]))
        return cls(iteration, loss, p, r, t1, t2, test_error, threshold_global, wall_clock_s)
