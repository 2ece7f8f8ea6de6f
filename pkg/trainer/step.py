"""
One training iteration.

`plan_step` does everything that happens before the recorded forward pass:
augmentation, pseudo-labelling on the weak views, threshold update,
partition, pairing and mixing. Its output is one input batch laid out as

    [ labeled | strong unlabeled | SRM mixes | CAM mixes ]

so batch normalisation sees all rows together. `compute_losses` slices the
recorded probabilities back into the four terms and `train_step` closes
the loop with backward, SGD and the parameter EMA.
"""
import math
import os
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from augment.mixing import MixOutcome, mix
from augment.policies import AugmentPolicy, weak_augment
from confidence.partition import Partition, pair_cam, pair_srm, partition
from confidence.threshold import ThresholdState, update_adaptive_threshold
from dataset.core import to_nchw
from diffcore import ops
from diffcore.model import PredictionBatch, forward, gradients
from diffcore.optim import ema_update, sgd_step
from diffcore.tensor import NonFiniteError, Tensor
from losses.terms import (
    LossParts,
    LossReport,
    ablation_terms,
    apply_ablation,
    cam_loss,
    consistency_loss,
    srm_mix_loss,
    supervised_loss,
    total_loss,
    zero_like,
)
from misc.logger import create_logger
from misc.rng import stream
from trainer.config import TrainConfig
from trainer.state import RunState

logger = create_logger('trainer.step')

DIAGNOSTICS_FILE = 'diagnostics.txt'


@dataclass(frozen=True)
class Batch:
    labeled_indices: np.ndarray
    labeled_images: np.ndarray
    labeled_labels: np.ndarray
    unlabeled_indices: np.ndarray
    unlabeled_images: np.ndarray


@dataclass
class StepPlan:
    inputs: np.ndarray
    labeled_labels: np.ndarray
    n_classes: int
    threshold: ThresholdState
    n_unlabeled: int = 0
    n_strong: int = 0
    weak_preds: Optional[PredictionBatch] = None
    partition: Optional[Partition] = None
    srm_pairs: np.ndarray = field(default_factory=lambda: np.empty((0, 2), np.int64))
    srm: List[MixOutcome] = field(default_factory=list)
    cam_pairs: np.ndarray = field(default_factory=lambda: np.empty((0, 2), np.int64))
    cam: List[MixOutcome] = field(default_factory=list)

    @property
    def n_labeled(self) -> int:
        return self.labeled_labels.shape[0]

    def rows(self) -> Dict[str, Tuple[int, int]]:
        bounds = {}
        start = 0
        for name, count in (
            ('labeled', self.n_labeled),
            ('strong', self.n_strong),
            ('srm', len(self.srm)),
            ('cam', len(self.cam)),
        ):
            bounds[name] = (start, start + count)
            start += count
        return bounds

    def _labels(self, outcomes: List[MixOutcome]) -> np.ndarray:
        if not outcomes:
            return np.empty((0, self.n_classes), dtype=np.float64)
        return np.stack([o.label for o in outcomes])

    @property
    def srm_labels(self) -> np.ndarray:
        return self._labels(self.srm)

    @property
    def cam_labels(self) -> np.ndarray:
        return self._labels(self.cam)

    @property
    def counts(self) -> Dict[str, int]:
        if self.partition is None:
            return {'size_mask': 0, 'size_H': 0, 'size_Hc': 0, 'cam_matched': 0}
        return {
            'size_mask': len(self.partition.mask),
            'size_H': len(self.partition.high),
            'size_Hc': len(self.partition.low),
            'cam_matched': len(self.cam),
        }


@dataclass(frozen=True)
class StepMetrics:
    plan: StepPlan
    lr: float

    @property
    def weak_preds(self) -> Optional[PredictionBatch]:
        return self.plan.weak_preds


def learning_rate(config: TrainConfig, iteration: int) -> float:
    if config.lr_schedule == 'cosine' and config.iterations > 0:
        return config.lr * math.cos(7.0 * math.pi * iteration / (16.0 * config.iterations))
    return config.lr


def _stack(images: List[np.ndarray], like: np.ndarray) -> np.ndarray:
    if not images:
        return np.empty((0,) + like.shape[1:], dtype=np.float32)
    return np.stack(images).astype(np.float32, copy=False)


def _augment_all(images: np.ndarray, policy, seed: int, purpose: str, iteration: int) -> np.ndarray:
    # One stream per sample: the result does not depend on processing order.
    return _stack(
        [policy(img, stream(seed, purpose, iteration, k)) for k, img in enumerate(images)],
        images,
    )


def plan_step(
    config: TrainConfig,
    state: RunState,
    batch: Batch,
    n_classes: int,
) -> StepPlan:
    it = state.iteration
    seed = state.seed
    terms = ablation_terms(config.ablation)

    labeled = batch.labeled_images
    if config.label_weak_aug == 'weak':
        labeled = _augment_all(labeled, weak_augment, seed, 'augment.labeled', it)
    plan = StepPlan(
        inputs=to_nchw(labeled),
        labeled_labels=np.asarray(batch.labeled_labels, dtype=np.int64),
        n_classes=n_classes,
        threshold=state.threshold,
    )
    unlabeled = batch.unlabeled_images
    if len(unlabeled) == 0 or not terms.unlabeled:
        return plan

    weak = _augment_all(unlabeled, weak_augment, seed, 'augment.weak', it)
    source = state.params if config.pseudo_source == 'live' else state.ema.shadow
    weak_preds = forward(source, to_nchw(weak), mode='train', record=False)

    threshold = state.threshold
    if threshold.is_adaptive:
        threshold = update_adaptive_threshold(threshold, weak_preds)
    part = partition(weak_preds, threshold, config.tau_m, exclusive=config.hc_exclusive)

    policy = AugmentPolicy.strong(use_cutout=config.cutout)
    strong = _augment_all(unlabeled, policy, seed, 'augment.strong', it)
    if config.strong_views == 'independent':
        mix_views = _augment_all(unlabeled, policy, seed, 'augment.strong.mix', it)
    else:
        mix_views = strong

    srm_pairs = np.empty((0, 2), np.int64)
    srm: List[MixOutcome] = []
    if terms.mixed:
        srm_pairs = pair_srm(part.high, stream(seed, 'pair.srm', it))
        srm = [
            mix(
                config.mix_strategy,
                mix_views[i], part.one_hot(i),
                mix_views[j], part.one_hot(j),
                config.alpha_h,
                stream(seed, 'mix.srm', it, k),
            )
            for k, (i, j) in enumerate(srm_pairs)
        ]

    cam_pairs = np.empty((0, 2), np.int64)
    cam: List[MixOutcome] = []
    if terms.cam:
        cam_pairs = pair_cam(
            part.low, part.high, part.pseudo_labels,
            stream(seed, 'pair.cam', it),
            class_aware=terms.class_aware,
        )
        cam = [
            mix(
                config.mix_strategy,
                mix_views[i], part.soft(i),
                mix_views[j], part.one_hot(j),
                config.alpha_l,
                stream(seed, 'mix.cam', it, k),
            )
            for k, (i, j) in enumerate(cam_pairs)
        ]

    strong_rows = strong if terms.clean else strong[:0]
    rows = np.concatenate([
        labeled,
        strong_rows,
        _stack([o.image for o in srm], unlabeled),
        _stack([o.image for o in cam], unlabeled),
    ])
    return replace(
        plan,
        inputs=to_nchw(rows),
        threshold=threshold,
        n_unlabeled=len(unlabeled),
        n_strong=len(strong_rows),
        weak_preds=weak_preds,
        partition=part,
        srm_pairs=srm_pairs,
        srm=srm,
        cam_pairs=cam_pairs,
        cam=cam,
    )


def compute_losses(
    plan: StepPlan,
    probs: Tensor,
    config: TrainConfig,
) -> Tuple[LossParts, Tensor, LossReport]:
    rows = plan.rows()
    l_s = supervised_loss(ops.take_rows(probs, *rows['labeled']), plan.labeled_labels)

    part = plan.partition
    if part is None:
        parts = LossParts(l_s, zero_like(probs), zero_like(probs), zero_like(probs))
    else:
        if plan.n_strong:
            l_u = consistency_loss(
                ops.take_rows(probs, *rows['strong']), part.pseudo_labels, part.mask, plan.n_unlabeled,
            )
        else:
            l_u = zero_like(probs)
        l_m = srm_mix_loss(ops.take_rows(probs, *rows['srm']), plan.srm_labels, len(part.high))
        divisor = len(part.low) if config.cam_divisor == 'hc' else len(plan.cam)
        l_cm = cam_loss(ops.take_rows(probs, *rows['cam']), plan.cam_labels, divisor)
        parts = LossParts(l_s, l_u, l_m, l_cm)

    parts = apply_ablation(parts, config.ablation)
    total = total_loss(parts, config.weight_u, config.weight_m, config.weight_cm)
    report = LossReport.from_parts(parts, total, **plan.counts)
    return parts, total, report


def _join(values) -> str:
    return ' '.join(str(v) for v in values)


def write_diagnostics(
    path: str,
    state: RunState,
    batch: Batch,
    plan: Optional[StepPlan],
    error: Exception,
) -> None:
    lines = [
        f"iteration={state.iteration}",
        f"error={error}",
        f"labeled_indices={_join(batch.labeled_indices)}",
        f"unlabeled_indices={_join(batch.unlabeled_indices)}",
    ]
    if plan is not None:
        lines.append(f"tau_global={plan.threshold.tau_global!r}")
        lines.append(f"srm_lambdas={_join(repr(o.lam) for o in plan.srm)}")
        lines.append(f"cam_lambdas={_join(repr(o.lam) for o in plan.cam)}")
        if plan.partition is not None:
            lines.append(f"high={_join(plan.partition.high)}")
            lines.append(f"low={_join(plan.partition.low)}")
            lines.append(f"mask={_join(plan.partition.mask)}")
            lines.append(f"srm_pairs={_join(f'{i}:{j}' for i, j in plan.srm_pairs)}")
            lines.append(f"cam_pairs={_join(f'{i}:{j}' for i, j in plan.cam_pairs)}")
    with open(path, 'w') as fp:
        fp.write('\n'.join(lines) + '\n')


def train_step(
    config: TrainConfig,
    state: RunState,
    batch: Batch,
    n_classes: int,
    run_dir: Optional[str] = None,
) -> Tuple[RunState, LossReport, StepMetrics]:
    plan: Optional[StepPlan] = None
    try:
        plan = plan_step(config, state, batch, n_classes)
        prediction = forward(state.params, plan.inputs, mode='train')
        _, total, report = compute_losses(plan, prediction.probs, config)
        if not report.is_finite:
            raise NonFiniteError(f"Non-finite loss at iteration {state.iteration}: {report}")
        grads = gradients(prediction, total)
    except NonFiniteError as e:
        if run_dir is not None:
            path = os.path.join(run_dir, DIAGNOSTICS_FILE)
            write_diagnostics(path, state, batch, plan, e)
            logger.error(f"Iteration {state.iteration}: {e}; diagnostics written to {path}")
        raise

    lr = learning_rate(config, state.iteration)
    params, opt = sgd_step(state.params, grads, state.opt.with_lr(lr))
    params = params.replace(prediction.running_stats)
    new_state = replace(
        state,
        iteration=state.iteration + 1,
        params=params,
        opt=opt,
        ema=ema_update(state.ema, params),
        threshold=plan.threshold,
    )
    return new_state, report, StepMetrics(plan, lr)
