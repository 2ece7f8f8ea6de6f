"""
Fixed and self-adaptive confidence thresholds.

In adaptive mode a global threshold tracks the EMA of the batch mean
maximum confidence, and a per-class expectation vector tracks the EMA of
the batch mean probability vector. The threshold of class c is the global
one scaled by p_c / max(p), so the most expected class gets the full
global threshold and rarer classes a lower one.
"""
from dataclasses import dataclass

import numpy as np

from diffcore.model import PredictionBatch

MODES = ('adaptive', 'fixed')


@dataclass(frozen=True)
class ThresholdState:
    mode: str
    tau_fixed: float
    tau_global: float
    class_expectation: np.ndarray
    decay: float

    def __post_init__(self) -> None:
        assert self.mode in MODES, self.mode
        assert 0.0 <= self.decay < 1.0, self.decay

    @classmethod
    def initial(
        cls,
        mode: str,
        n_classes: int,
        decay: float,
        tau_fixed: float = 0.95,
    ) -> 'ThresholdState':
        return cls(
            mode=mode,
            tau_fixed=tau_fixed,
            tau_global=1.0 / n_classes,
            class_expectation=np.full(n_classes, 1.0 / n_classes, dtype=np.float64),
            decay=decay,
        )

    @property
    def n_classes(self) -> int:
        return self.class_expectation.shape[0]

    @property
    def is_adaptive(self) -> bool:
        return self.mode == 'adaptive'

    def class_thresholds(self) -> np.ndarray:
        if not self.is_adaptive:
            return np.full(self.n_classes, self.tau_fixed, dtype=np.float64)
        p = self.class_expectation
        return p / p.max() * self.tau_global


def update_adaptive_threshold(state: ThresholdState, preds: PredictionBatch) -> ThresholdState:
    if not state.is_adaptive:
        raise ValueError("Threshold is fixed")
    if len(preds) == 0:
        raise ValueError("Cannot update the threshold from an empty batch")
    q = preds.q.astype(np.float64)
    if q.shape[1] != state.n_classes:
        raise ValueError(f"Predictions have {q.shape[1]} classes, threshold tracks {state.n_classes}")
    m = state.decay
    tau_global = m * state.tau_global + (1.0 - m) * float(q.max(axis=1).mean())
    expectation = m * state.class_expectation + (1.0 - m) * q.mean(axis=0)
    return ThresholdState(state.mode, state.tau_fixed, tau_global, expectation, m)


def effective_tau_c(state: ThresholdState, cls: int) -> float:
    assert 0 <= cls < state.n_classes, cls
    return float(state.class_thresholds()[cls])
