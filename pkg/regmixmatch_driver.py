#!/usr/bin/env python3

"""
Runs groups of training runs (ablation presets, one-key sweeps) from a
shared base config, one run directory each. Runs whose final checkpoint
already exists are skipped, so an interrupted grid picks up where it
stopped.
"""
import argparse
import enum
import io
import os
import sys

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from diffcore.tensor import NonFiniteError
from metrics.csvlog import read_metrics
from misc.logger import create_logger
from trainer.config import ConfigError, TrainConfig, format_value, parse_config, with_overrides
from trainer.loop import FINAL_CHECKPOINT, final_error, train_loop


class Result(enum.Enum):
    OK = 'ok'
    SKIPPED = 'skipped'
    ERROR = 'error'


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    overrides: Mapping[str, str]

    def apply(self, config: TrainConfig) -> TrainConfig:
        return with_overrides(config, self.overrides)


PRESETS: Dict[str, ExperimentPreset] = {
    p.name: p for p in (
        ExperimentPreset('full', {}),
        ExperimentPreset('no_mixed', {'ablation': 'no_mixed'}),
        ExperimentPreset('no_clean', {'ablation': 'no_clean'}),
        ExperimentPreset('no_cam', {'ablation': 'no_cam'}),
        ExperimentPreset('cam_mixup', {'ablation': 'cam_mixup'}),
        ExperimentPreset('supervised', {'ablation': 'supervised'}),
        ExperimentPreset('fixmatch', {'ablation': 'fixmatch'}),
        ExperimentPreset('mixup_only', {'ablation': 'mixup_only'}),
        ExperimentPreset('fixed_threshold', {'threshold_mode': 'fixed'}),
        ExperimentPreset('mixup', {'mix_strategy': 'mixup'}),
    )
}
ABLATION_GRID = ('no_mixed', 'no_clean', 'no_cam', 'cam_mixup')


@dataclass(frozen=True)
class Run:
    name: str
    config: TrainConfig

    @property
    def metrics_name(self) -> str:
        return f"{self.name}.csv"

    @property
    def metrics_path(self) -> str:
        return os.path.join(self.config.out_dir, self.metrics_name)


def execute(run: Run) -> Result:
    """Trains one run unless it already finished. Safe to call in a worker process."""
    logger = create_logger('regmixmatch_driver')
    if os.path.exists(os.path.join(run.config.out_dir, FINAL_CHECKPOINT)):
        logger.warning(f"{run.name}: Already trained. Skipping.")
        return Result.SKIPPED
    try:
        train_loop(run.config, metrics_name=run.metrics_name)
    except (NonFiniteError, ConfigError, OSError, ValueError) as e:
        logger.error(f"{run.name}: {e}")
        return Result.ERROR
    logger.info(f"{run.name}: Successfully trained.")
    return Result.OK


class ExperimentDriver:

    def __init__(
        self,
        base: TrainConfig,
        out_dir: str,
        base_name: str,
        parallel: bool = False,
        workers: Optional[int] = None,
    ) -> None:
        self.logger = create_logger('regmixmatch_driver')
        self.base = base
        self.out_dir = out_dir
        self.base_name = base_name
        self.parallel = parallel
        self.workers = workers

    def make_run(self, suffix: str, config: TrainConfig) -> Run:
        name = f"{self.base_name}_{suffix}"
        return Run(name, replace(config, out_dir=os.path.join(self.out_dir, name)))

    def preset_runs(self, presets: Sequence[str], seeds: Sequence[int] = ()) -> List[Run]:
        runs: List[Run] = []
        for preset in presets:
            config = PRESETS[preset].apply(self.base)
            if not seeds:
                runs.append(self.make_run(preset, config))
            for seed in seeds:
                runs.append(self.make_run(f"{preset}_seed{seed}", replace(config, seed=seed)))
        return runs

    def sweep_runs(self, key: str, values: Sequence[str]) -> List[Run]:
        runs: List[Run] = []
        for value in values:
            config = with_overrides(self.base, {key: value})
            runs.append(self.make_run(f"{key}_{value}", config))
        return runs

    def run(self, runs: Sequence[Run]) -> Dict[str, Result]:
        os.makedirs(self.out_dir, exist_ok=True)
        if self.parallel and len(runs) > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(execute, runs))
        else:
            results = [execute(run) for run in runs]
        return {run.name: result for run, result in zip(runs, results)}


def summarise(runs: Sequence[Run], key: Optional[str] = None) -> List[Tuple[str, str, Optional[float]]]:
    """(run name, swept value or preset, final test error) for every run with metrics."""
    rows = []
    for run in runs:
        if not os.path.exists(run.metrics_path):
            continue
        value = format_value(getattr(run.config, key)) if key else run.name
        rows.append((run.name, value, final_error(read_metrics(run.metrics_path))))
    return rows


def format_summary(rows, header: str = 'value') -> str:
    with io.StringIO() as fp:
        fp.write(f"run,{header},final_test_error\n")
        for name, value, error in rows:
            fp.write(f"{name},{value},{'' if error is None else f'{error:.6g}'}\n")
        return fp.getvalue()


def write_summary(path: str, rows, header: str = 'value') -> None:
    with open(path, 'w') as fp:
        fp.write(format_summary(rows, header))


def parse_sweep(spec: str) -> Tuple[str, List[str]]:
    """'alpha_l=1,2,4' -> ('alpha_l', ['1', '2', '4'])"""
    if '=' not in spec:
        raise ConfigError(f"Expected key=v1,v2,..., got {spec!r}")
    key, values = spec.split('=', 1)
    parsed = [v.strip() for v in values.split(',') if v.strip()]
    if not parsed:
        raise ConfigError(f"No values to sweep in {spec!r}")
    return key.strip(), parsed


def main() -> None:
    parser = argparse.ArgumentParser()

    parser.add_argument(
        '--parallel',
        action='store_true',
        help="Run independent runs as separate processes.",
    )
    parser.add_argument('--name', default=None, help="Base name of the runs. (default: config file name)")
    sub = parser.add_subparsers(dest='mode', required=True)

    presets = sub.add_parser('presets', help="Run named presets.")
    presets.add_argument(
        '-p', '--preset',
        action='append',
        choices=sorted(PRESETS),
        help="Preset to run; repeat for several. (default: the ablation grid)",
    )
    presets.add_argument(
        '-s', '--seeds',
        default='',
        help="Comma-separated seeds; every preset runs once per seed.",
    )
    sweep = sub.add_parser('sweep', help="Vary one config key.")
    sweep.add_argument('values', help="key=v1,v2,... such as alpha_l=1,2,4,8,16,32")

    for p in (presets, sweep):
        p.add_argument('config', help="Base config file.")
        p.add_argument('output', help="Path to where the run directories should be stored.")

    args = parser.parse_args()
    try:
        base = parse_config(args.config)
    except (OSError, ConfigError) as e:
        print(f"Could not load config: {e}", file=sys.stderr)
        sys.exit(1)
    base_name = args.name or os.path.splitext(os.path.basename(args.config))[0]
    out_dir = os.path.expanduser(args.output)
    driver = ExperimentDriver(base, out_dir, base_name, parallel=args.parallel)

    if args.mode == 'presets':
        seeds = [int(s) for s in args.seeds.split(',') if s.strip()]
        runs = driver.preset_runs(args.preset or ABLATION_GRID, seeds)
        key = None
    else:
        key, values = parse_sweep(args.values)
        runs = driver.sweep_runs(key, values)

    results = driver.run(runs)
    rows = summarise(runs, key)
    write_summary(os.path.join(out_dir, f"{base_name}_summary.csv"), rows, key or 'run')
    print(format_summary(rows, key or 'run'), end='')
    if any(r == Result.ERROR for r in results.values()):
        sys.exit(1)


if __name__ == '__main__':
    main()
