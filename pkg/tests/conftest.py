import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from dataset.glyphs import make_synthetic_glyphs  # noqa: E402
from diffcore.model import PredictionBatch, init_small_convnet  # noqa: E402
from misc.rng import stream  # noqa: E402
from trainer import step  # noqa: E402
from trainer.config import TrainConfig, with_overrides  # noqa: E402
from trainer.state import RunState  # noqa: E402
from trainer.step import Batch  # noqa: E402

TINY = {
    'synthetic_classes': 3,
    'synthetic_per_class': 8,
    'synthetic_test_per_class': 4,
    'image_size': 16,
    'labels_per_class': 2,
    'batch_size': 4,
    'mu': 2,
    'iterations': 4,
    'eval_interval': 2,
    'record_wall_clock': False,
}


@pytest.fixture
def tiny_config(tmp_path) -> TrainConfig:
    """A synthetic run small enough to train a few iterations in seconds."""
    return with_overrides(TrainConfig(), dict(TINY, out_dir=str(tmp_path / 'run')))


@pytest.fixture(scope='session')
def glyphs():
    return make_synthetic_glyphs(seed=0, n_classes=3, n_per_class=8, size=16)


@pytest.fixture
def small_params():
    return init_small_convnet(np.random.default_rng(0), 3, 3, widths=(4, 4, 4))


# Weak-view predictions of an 8-sample unlabeled batch: rows 0-3 are
# confident (classes 0, 1, 0, 2), rows 4-7 are not (argmax 0, 1, 2, 0).
DESIGNED_Q = np.array([
    [0.98, 0.01, 0.01],
    [0.01, 0.98, 0.01],
    [0.97, 0.02, 0.01],
    [0.01, 0.02, 0.97],
    [0.60, 0.30, 0.10],
    [0.30, 0.50, 0.20],
    [0.20, 0.30, 0.50],
    [0.45, 0.35, 0.20],
], dtype=np.float32)


@pytest.fixture
def designed_weak_predictions(monkeypatch):
    """Replaces the unrecorded weak-view forward pass of a training step."""
    real_forward = step.forward

    def fake_forward(params, batch, mode='eval', record=None):
        if record is False:
            assert batch.shape[0] == DESIGNED_Q.shape[0]
            return PredictionBatch.from_probabilities(DESIGNED_Q.copy())
        return real_forward(params, batch, mode, record)

    monkeypatch.setattr(step, 'forward', fake_forward)
    return DESIGNED_Q


@pytest.fixture
def eight_by_eight(tmp_path):
    """Config, fresh state and an 8 labeled / 8 unlabeled batch of glyphs."""

    config = with_overrides(TrainConfig(), dict(
        TINY,
        batch_size=8,
        mu=1,
        threshold_mode='fixed',
        tau_fixed=0.55,
        tau_m=0.95,
        out_dir=str(tmp_path / 'run'),
    ))
    ds = make_synthetic_glyphs(seed=0, n_classes=3, n_per_class=8, size=16)
    params = init_small_convnet(stream(0, 'init'), 3, 3, widths=(8, 8, 8))
    state = RunState.fresh(config, params, 3)
    batch = Batch(
        labeled_indices=np.arange(8),
        labeled_images=ds.images[:8],
        labeled_labels=ds.labels[:8],
        unlabeled_indices=np.arange(8, 16),
        unlabeled_images=ds.images[8:16],
    )
    return config, state, batch
