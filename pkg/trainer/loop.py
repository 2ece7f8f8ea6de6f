"""
The outer training loop: data, initial state or checkpoint, one metrics
row per iteration, periodic evaluation and checkpoints.
"""
import os
import sys
import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from augment.mixing import dump_ppm
from dataset.core import channel_statistics
from dataset.split import SplitSpec, batch_stream, split_labeled
from diffcore.model import init_small_convnet
from metrics.csvlog import MetricsWriter
from metrics.diagnostics import DiagnosticRow
from misc.logger import create_logger
from misc.rng import stream
from trainer.config import TrainConfig, format_config
from trainer.evaluation import evaluate
from trainer.sources import load_splits
from trainer.state import RunState, checkpoint_name, load_checkpoint, save_checkpoint
from trainer.step import Batch, StepMetrics, train_step

logger = create_logger('trainer.loop')

CONFIG_FILE = 'config.cfg'
METRICS_FILE = 'metrics.csv'
FINAL_CHECKPOINT = 'final.rmm'


@dataclass(frozen=True)
class LoopResult:
    state: RunState
    run_dir: str
    metrics_path: str
    final_test_error: Optional[float]

    @property
    def checkpoint_path(self) -> str:
        return os.path.join(self.run_dir, FINAL_CHECKPOINT)


def _dump_mixes(run_dir: str, metrics: StepMetrics) -> None:
    out = os.path.join(run_dir, 'mixed')
    os.makedirs(out, exist_ok=True)
    for kind, outcomes in (('srm', metrics.plan.srm), ('cam', metrics.plan.cam)):
        for k, outcome in enumerate(outcomes):
            dump_ppm(os.path.join(out, f"{kind}_{k:04d}.ppm"), outcome.image)
    logger.info(f"Dumped {len(metrics.plan.srm)} SRM and {len(metrics.plan.cam)} CAM mixes to {out}")


def _print_progress(done: int, total: int) -> None:
    progress = 100.0 * done / total if total else 100.0
    print(f"\r\033[1A{progress: >3.0f} % ({done} / {total})", file=sys.stderr)


def train_loop(
    config: TrainConfig,
    resume: Optional[str] = None,
    metrics_name: str = METRICS_FILE,
    dump_mixed: bool = False,
    progress: bool = False,
) -> LoopResult:
    run_dir = os.path.expanduser(config.out_dir)
    os.makedirs(run_dir, exist_ok=True)
    with open(os.path.join(run_dir, CONFIG_FILE), 'w') as fp:
        fp.write(format_config(config))

    train, test = load_splits(config)
    labeled, unlabeled = split_labeled(
        train, SplitSpec(config.labels_per_class, config.data_seed, config.include_labeled),
    )
    hidden_labels = unlabeled.diagnostic_labels()
    n_classes = train.n_classes

    metrics_path = os.path.join(run_dir, metrics_name)
    if resume is not None:
        state = load_checkpoint(resume, config)
        writer = MetricsWriter.resume(metrics_path, state.iteration)
        logger.info(f"Resuming from {resume} at iteration {state.iteration}")
    else:
        mean, std = channel_statistics(train.images)
        params = init_small_convnet(
            stream(config.seed, 'init'), train.channels, n_classes, mean, std,
        )
        state = RunState.fresh(config, params, n_classes)
        writer = MetricsWriter.create(metrics_path)

    batches = batch_stream(
        labeled, unlabeled, config.batch_size, config.mu, state.seed, start=state.iteration,
    )
    final_test_error: Optional[float] = None
    while state.iteration < config.iterations:
        labeled_idx, unlabeled_idx = next(batches)
        batch = Batch(
            labeled_indices=labeled_idx,
            labeled_images=labeled.images[labeled_idx],
            labeled_labels=labeled.labels[labeled_idx],
            unlabeled_indices=unlabeled_idx,
            unlabeled_images=unlabeled.images[unlabeled_idx],
        )

        started = time.perf_counter()
        state, report, step = train_step(config, state, batch, n_classes, run_dir)
        if config.record_wall_clock:
            state = replace(state, wall_clock=state.wall_clock + time.perf_counter() - started)
        if dump_mixed and state.iteration == 1:
            _dump_mixes(run_dir, step)

        it = state.iteration
        test_error: Optional[float] = None
        if it % config.eval_interval == 0 or it == config.iterations:
            ema_result = evaluate(state.ema.shadow, test)
            live_result = evaluate(state.params, test)
            test_error = final_test_error = ema_result.error_rate
            logger.info(
                f"Iteration {it}: EMA test error {ema_result.error_rate:.4f}, "
                f"live test error {live_result.error_rate:.4f}, "
                f"tau_global {state.threshold.tau_global:.4f}"
            )
            save_checkpoint(os.path.join(run_dir, checkpoint_name(it)), state)

        writer.append(DiagnosticRow.measure(
            iteration=it,
            loss=report,
            preds=step.weak_preds,
            labels=hidden_labels[unlabeled_idx] if len(unlabeled_idx) else None,
            purity_threshold=config.purity_threshold,
            threshold_global=float(state.threshold.class_thresholds().max()),
            wall_clock_s=state.wall_clock,
            test_error=test_error,
        ))
        if progress:
            _print_progress(it, config.iterations)

    save_checkpoint(os.path.join(run_dir, FINAL_CHECKPOINT), state)
    return LoopResult(state, run_dir, metrics_path, final_test_error)


def final_error(metrics_rows) -> Optional[float]:
    """Last test error recorded in a metrics file, if any."""
    errors = [row['test_error'] for row in metrics_rows if row['test_error'] is not None]
    return errors[-1] if errors else None


def mean_of(rows, column: str, last: int) -> Optional[float]:
    values = [row[column] for row in rows[-last:] if row[column] is not None]
    return float(np.mean(values)) if values else None
