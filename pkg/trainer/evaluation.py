from dataclasses import dataclass
from typing import Dict

import numpy as np

from dataset.core import Dataset, to_nchw
from diffcore.model import ParameterSet, forward
from metrics.diagnostics import topk_accuracy

EVAL_CHUNK = 500


@dataclass(frozen=True)
class EvalResult:
    error_rate: float
    topk: Dict[int, float]

    @property
    def top1(self) -> float:
        return self.topk[1]


def predict(params: ParameterSet, images: np.ndarray, chunk: int = EVAL_CHUNK) -> np.ndarray:
    """Eval-mode probabilities; rows are independent, so chunking does not change them."""
    parts = [
        forward(params, to_nchw(images[start:start + chunk]), mode='eval').q
        for start in range(0, len(images), chunk)
    ]
    return np.concatenate(parts, axis=0)


def evaluate(params: ParameterSet, test: Dataset, ks=(1, 2)) -> EvalResult:
    if len(test) == 0:
        raise ValueError("Test set is empty")
    q = predict(params, test.images)
    topk = {k: topk_accuracy(q, test.labels, k) for k in ks if k <= test.n_classes}
    return EvalResult(1.0 - topk[1], topk)
