"""
Splitting an unlabeled batch by confidence and drawing mixing partners.
"""
from dataclasses import dataclass

import numpy as np

from confidence.threshold import ThresholdState
from diffcore.model import PredictionBatch


@dataclass(frozen=True)
class Partition:
    """
    `high` holds the indices with confidence > tau_m, `low` the rest (minus
    the consistency mask in exclusive mode), `mask` the indices whose
    confidence reaches the threshold of their pseudo-label's class.
    """
    high: np.ndarray
    low: np.ndarray
    mask: np.ndarray
    pseudo_labels: np.ndarray
    confidence: np.ndarray
    soft_labels: np.ndarray

    def __len__(self) -> int:
        return self.pseudo_labels.shape[0]

    @property
    def n_classes(self) -> int:
        return self.soft_labels.shape[1]

    def one_hot(self, index: int) -> np.ndarray:
        label = np.zeros(self.n_classes, dtype=np.float64)
        label[self.pseudo_labels[index]] = 1.0
        return label

    def soft(self, index: int) -> np.ndarray:
        # float32 softmax rows are only a simplex up to rounding.
        q = self.soft_labels[index].astype(np.float64)
        return q / q.sum()


def partition(
    preds: PredictionBatch,
    state: ThresholdState,
    tau_m: float,
    exclusive: bool = False,
) -> Partition:
    assert 0.0 < tau_m < 1.0, tau_m
    q = preds.q
    pseudo = np.argmax(q, axis=1)
    confidence = q[np.arange(len(pseudo)), pseudo]

    is_high = confidence > tau_m
    in_mask = confidence >= state.class_thresholds()[pseudo]
    is_low = ~is_high
    if exclusive:
        is_low &= ~in_mask

    return Partition(
        high=np.flatnonzero(is_high),
        low=np.flatnonzero(is_low),
        mask=np.flatnonzero(in_mask),
        pseudo_labels=pseudo,
        confidence=confidence,
        soft_labels=q,
    )


def pair_srm(high: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One partner per member of `high`, uniform over `high`, self-pairs allowed."""
    if len(high) == 0:
        return np.empty((0, 2), dtype=np.int64)
    partners = high[rng.integers(len(high), size=len(high))]
    return np.stack([high, partners], axis=1).astype(np.int64)


def pair_cam(
    low: np.ndarray,
    high: np.ndarray,
    pseudo_labels: np.ndarray,
    rng: np.random.Generator,
    class_aware: bool = True,
) -> np.ndarray:
    """
    For each low-confidence index i, a partner j from `high` with
    pseudo_labels[j] == pseudo_labels[i]; i is skipped when there is none.
    Without `class_aware` the partner is any member of `high`.
    """
    pairs = []
    for i in low:
        if class_aware:
            candidates = high[pseudo_labels[high] == pseudo_labels[i]]
        else:
            candidates = high
        if len(candidates) == 0:
            continue
        pairs.append((i, candidates[rng.integers(len(candidates))]))
    if not pairs:
        return np.empty((0, 2), dtype=np.int64)
    return np.asarray(pairs, dtype=np.int64)
