"""
The four loss terms and their sum.

Every term takes the rows of one recorded forward pass that belong to it
(labeled, strong unlabeled, SRM mixed, CAM mixed) and returns a scalar
graph node, so one backward pass covers the whole objective. A term with
no rows is an exact zero constant.
"""
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from diffcore import ops
from diffcore.tensor import Tensor

EPS = 1e-12


@dataclass(frozen=True)
class Ablation:
    """Which parts of the objective a run keeps."""
    clean: bool = True
    mixed: bool = True
    cam: bool = True
    class_aware: bool = True
    unlabeled: bool = True


ABLATION_TERMS = {
    'none': Ablation(),
    'no_mixed': Ablation(mixed=False),
    'no_clean': Ablation(clean=False),
    'no_cam': Ablation(cam=False),
    'cam_mixup': Ablation(class_aware=False),
    'supervised': Ablation(clean=False, mixed=False, cam=False, unlabeled=False),
    # Baselines: consistency only, and pseudo-label mixup only.
    'fixmatch': Ablation(mixed=False, cam=False),
    'mixup_only': Ablation(clean=False, cam=False),
}
ABLATIONS = tuple(ABLATION_TERMS)
CAM_DIVISORS = ('hc', 'matched')


def zero_like(probs: Tensor) -> Tensor:
    return Tensor(np.zeros((), dtype=probs.data.dtype))


def soft_cross_entropy_sum(probs: Tensor, targets: np.ndarray) -> Tensor:
    """sum_b -sum_c targets[b, c] * ln probs[b, c]"""
    assert probs.shape == targets.shape, (probs.shape, targets.shape)
    weights = Tensor(np.asarray(targets, dtype=probs.data.dtype))
    return ops.scale(ops.total(ops.mul(ops.log_clamped(probs, EPS), weights)), -1.0)


def supervised_loss(probs: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross-entropy of the labeled rows against their true classes."""
    n = probs.shape[0]
    assert n >= 1 and labels.shape == (n,), (probs.shape, labels.shape)
    picked = ops.take_entries(probs, np.arange(n), np.asarray(labels, dtype=np.int64))
    return ops.scale(ops.total(ops.log_clamped(picked, EPS)), -1.0 / n)


def consistency_loss(
    probs_strong: Tensor,
    pseudo_labels: np.ndarray,
    mask: np.ndarray,
    n_unlabeled: int,
) -> Tensor:
    """
    Cross-entropy of the strong views against the pseudo-labels of the
    masked samples, divided by the full unlabeled batch size.
    """
    if len(mask) == 0 or n_unlabeled == 0:
        return zero_like(probs_strong)
    picked = ops.take_entries(probs_strong, np.asarray(mask), pseudo_labels[mask])
    return ops.scale(ops.total(ops.log_clamped(picked, EPS)), -1.0 / n_unlabeled)


def srm_mix_loss(probs_mixed: Tensor, mixed_labels: np.ndarray, n_high: int) -> Tensor:
    """Soft cross-entropy of the high-confidence mixes, divided by |H|."""
    if probs_mixed.shape[0] == 0 or n_high == 0:
        return zero_like(probs_mixed)
    return ops.scale(soft_cross_entropy_sum(probs_mixed, mixed_labels), 1.0 / n_high)


def cam_loss(probs_mixed: Tensor, mixed_labels: np.ndarray, divisor: int) -> Tensor:
    """Squared L2 distance between prediction and mixed soft label, summed over rows."""
    if probs_mixed.shape[0] == 0 or divisor == 0:
        return zero_like(probs_mixed)
    target = Tensor(np.asarray(mixed_labels, dtype=probs_mixed.data.dtype))
    diff = ops.sub(probs_mixed, target)
    return ops.scale(ops.total(ops.square(diff)), 1.0 / divisor)


@dataclass(frozen=True)
class LossParts:
    l_s: Tensor
    l_u: Tensor
    l_m: Tensor
    l_cm: Tensor

    def values(self) -> Tuple[float, float, float, float]:
        return (self.l_s.item(), self.l_u.item(), self.l_m.item(), self.l_cm.item())


def ablation_terms(ablation: str) -> Ablation:
    if ablation not in ABLATION_TERMS:
        raise ValueError(f"Unknown ablation: {ablation}")
    return ABLATION_TERMS[ablation]


def apply_ablation(parts: LossParts, ablation: str) -> LossParts:
    terms = ablation_terms(ablation)
    zero = zero_like(parts.l_s)
    return replace(
        parts,
        l_u=parts.l_u if terms.clean else zero,
        l_m=parts.l_m if terms.mixed else zero,
        l_cm=parts.l_cm if terms.cam else zero,
    )


def total_loss(
    parts: LossParts,
    weight_u: float = 1.0,
    weight_m: float = 1.0,
    weight_cm: float = 1.0,
) -> Tensor:
    total = ops.add(parts.l_s, ops.scale(parts.l_u, weight_u))
    total = ops.add(total, ops.scale(parts.l_m, weight_m))
    return ops.add(total, ops.scale(parts.l_cm, weight_cm))


@dataclass(frozen=True)
class LossReport:
    l_s: float
    l_u: float
    l_m: float
    l_cm: float
    total: float
    size_mask: int
    size_H: int
    size_Hc: int
    cam_matched: int

    @classmethod
    def from_parts(
        cls,
        parts: LossParts,
        total: Tensor,
        size_mask: int = 0,
        size_H: int = 0,
        size_Hc: int = 0,
        cam_matched: int = 0,
    ) -> 'LossReport':
        l_s, l_u, l_m, l_cm = parts.values()
        return cls(l_s, l_u, l_m, l_cm, total.item(), size_mask, size_H, size_Hc, cam_matched)

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite([self.l_s, self.l_u, self.l_m, self.l_cm, self.total])))
