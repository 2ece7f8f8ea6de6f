"""
Desk-scale comparison on the synthetic glyphs: full training against the
supervised-only baseline and the run without clean samples, three seeds
each. Slow; run with `pytest -m slow`.
"""
import os
from dataclasses import replace

import numpy as np
import pytest

import regmixmatch_driver as driver
from metrics.csvlog import read_metrics
from trainer.config import parse_config
from trainer.loop import final_error, mean_of, train_loop

PRESET = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'data', 'presets', 'desk.cfg')
SEEDS = (0, 1, 2)
COMPARED = ('full', 'supervised', 'no_clean')
PURITY_WINDOW = 1000

# Smallest mean test-error gap (absolute) the full run must keep over each
# baseline. TODO: replace with the gaps observed on the three-seed desk grid
# (`regmixmatch_driver.py presets -p full -p supervised -p no_clean -s 0,1,2`), less
# one seed's spread.
MIN_GAP = {
    'supervised': 0.02,
    'no_clean': 0.0,
}

pytestmark = pytest.mark.slow


@pytest.fixture(scope='module')
def desk_runs(tmp_path_factory):
    base = parse_config(PRESET)
    out = tmp_path_factory.mktemp('desk')
    rows = {}
    for preset in COMPARED:
        for seed in SEEDS:
            config = replace(driver.PRESETS[preset].apply(base), seed=seed, out_dir=str(out / f"{preset}_{seed}"))
            result = train_loop(config)
            rows[preset, seed] = read_metrics(result.metrics_path)
    return rows


def mean_error(desk_runs, preset):
    return float(np.mean([final_error(desk_runs[preset, seed]) for seed in SEEDS]))


@pytest.mark.parametrize('baseline', sorted(MIN_GAP))
def test_full_beats_baseline(desk_runs, baseline):
    gap = mean_error(desk_runs, baseline) - mean_error(desk_runs, 'full')
    assert gap > MIN_GAP[baseline], gap


def test_clean_samples_keep_purity_up(desk_runs):
    wins = sum(
        mean_of(desk_runs['full', seed], 'purity', PURITY_WINDOW)
        >= mean_of(desk_runs['no_clean', seed], 'purity', PURITY_WINDOW)
        for seed in SEEDS
    )
    assert wins >= 2
