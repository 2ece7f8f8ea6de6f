#!/usr/bin/env python3

"""
regmixmatch

Semi-supervised image classification: consistency and mixing on confident
unlabeled samples, class-aware mixing on the unconfident rest.
"""
import argparse
import dataclasses
import json
import os
import sys

from typing import Any, Dict, List, Tuple

import numpy as np

from diffcore.checkpoint import CheckpointError
from diffcore.tensor import NonFiniteError
from misc.logger import create_logger
from trainer.config import ConfigError, TrainConfig, parse_config, with_overrides
from trainer.evaluation import evaluate
from trainer.loop import train_loop
from trainer.sources import load_splits
from trainer.state import load_checkpoint

import report
import regmixmatch_driver as driver

logger = create_logger('regmixmatch')

SUBCOMMANDS = ('train', 'eval', 'ablate', 'sweep', 'plot', 'report')

Stage = Tuple[bool, dict]


def dump_state(state: dict, fp=sys.stdout):
    def serialise(input):
        """
        Make the state JSON friendly: dataclasses become dicts, numpy
        values plain numbers and lists. Traverses lists and dicts.
        """
        if dataclasses.is_dataclass(input) and not isinstance(input, type):
            return serialise(dataclasses.asdict(input))
        elif isinstance(input, dict):
            return {str(k): serialise(v) for k, v in input.items()}
        elif isinstance(input, (list, tuple)):
            return [serialise(x) for x in input]
        elif isinstance(input, np.ndarray):
            return input.tolist()
        elif isinstance(input, np.generic):
            return input.item()
        elif isinstance(input, (str, int, float, bool)) or input is None:
            return input
        return repr(input)

    json.dump(serialise(state), fp, indent=4, sort_keys=True)
    fp.write('\n')


def load_config(state: dict) -> Stage:
    arguments = state['arguments']
    try:
        config = parse_config(arguments['config']) if arguments.get('config') else TrainConfig()
        overrides = dict(item.split('=', 1) for item in arguments.get('set') or [])
        if arguments.get('out_dir'):
            overrides['out_dir'] = arguments['out_dir']
        config = with_overrides(config, overrides)
    except (OSError, ConfigError, ValueError) as e:
        logger.error(f"Invalid configuration: {e}")
        return False, state
    state['config'] = config
    return True, state


def run_training(state: dict) -> Stage:
    arguments = state['arguments']
    try:
        result = train_loop(
            state['config'],
            resume=arguments.get('resume'),
            dump_mixed=arguments.get('dump_mixed', False),
            progress=arguments.get('progress', False),
        )
    except (NonFiniteError, CheckpointError, OSError, ValueError) as e:
        logger.error(f"Training failed: {e}")
        return False, state
    state['result'] = {
        'run_dir': result.run_dir,
        'metrics': result.metrics_path,
        'checkpoint': result.checkpoint_path,
        'iterations': result.state.iteration,
        'final_test_error': result.final_test_error,
    }
    return True, state


def score_checkpoint(state: dict) -> Stage:
    arguments = state['arguments']
    config: TrainConfig = state['config']
    try:
        run_state = load_checkpoint(arguments['checkpoint'], config)
        _, test = load_splits(config)
        ema = evaluate(run_state.ema.shadow, test)
        live = evaluate(run_state.params, test)
    except (CheckpointError, OSError, ValueError) as e:
        logger.error(f"Could not evaluate {arguments['checkpoint']}: {e}")
        return False, state
    state['result'] = {
        'iteration': run_state.iteration,
        'ema': {'error_rate': ema.error_rate, 'topk': ema.topk},
        'live': {'error_rate': live.error_rate, 'topk': live.topk},
    }
    return True, state


def run_group(state: dict) -> Stage:
    arguments = state['arguments']
    config: TrainConfig = state['config']
    out_dir = os.path.expanduser(arguments['output'])
    base_name = arguments.get('name') or 'run'
    experiments = driver.ExperimentDriver(config, out_dir, base_name, parallel=arguments.get('parallel', False))
    try:
        if arguments['subcommand'] == 'ablate':
            runs = experiments.preset_runs(arguments.get('presets') or driver.ABLATION_GRID)
            key = None
        else:
            key, values = driver.parse_sweep(arguments['values'])
            runs = experiments.sweep_runs(key, values)
    except ConfigError as e:
        logger.error(f"Invalid experiment: {e}")
        return False, state

    results = experiments.run(runs)
    rows = driver.summarise(runs, key)
    driver.write_summary(os.path.join(out_dir, f"{base_name}_summary.csv"), rows, key or 'run')
    state['result'] = {
        'runs': {name: r.value for name, r in results.items()},
        'summary': [list(row) for row in rows],
    }
    failed = [name for name, r in results.items() if r == driver.Result.ERROR]
    if failed:
        logger.error(f"Failed runs: {', '.join(failed)}")
        return False, state
    return True, state


def render(state: dict) -> Stage:
    arguments = state['arguments']
    try:
        if arguments['subcommand'] == 'plot':
            columns = [c.strip() for c in arguments['columns'].split(',') if c.strip()]
            output = report.render_plot(
                [report.load_metrics(path) for path in arguments['metrics']],
                columns,
                arguments.get('title') or "Training curves",
            )
        else:
            output = report.render_report(arguments['run_dir'], arguments.get('title'))
        with open(arguments['output'], 'w') as fp:
            fp.write(output)
    except (report.ReportError, OSError) as e:
        logger.error(f"Could not render {arguments['output']}: {e}")
        return False, state
    state['result'] = {'output': arguments['output']}
    return True, state


PIPELINES: Dict[str, List[Tuple[Any, str]]] = {
    'train': [(load_config, "Could not load config."), (run_training, "Could not train.")],
    'eval': [(load_config, "Could not load config."), (score_checkpoint, "Could not evaluate.")],
    'ablate': [(load_config, "Could not load config."), (run_group, "Could not run ablation.")],
    'sweep': [(load_config, "Could not load config."), (run_group, "Could not run sweep.")],
    'plot': [(render, "Could not plot.")],
    'report': [(render, "Could not write report.")],
}


def run(subcommand: str, args: argparse.Namespace) -> int:
    assert subcommand in SUBCOMMANDS, subcommand
    arguments = dict(vars(args))
    arguments['subcommand'] = subcommand
    state: Dict[str, Any] = {'arguments': arguments}

    for stage, failure in PIPELINES[subcommand]:
        success, state = stage(state)
        if not success:
            print(failure, file=sys.stderr)
            dump_state(state, fp=sys.stderr)
            return 1

    if subcommand in ('train', 'eval', 'ablate', 'sweep'):
        dump_state({'config': state['config'], 'result': state['result']})
    return 0


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('-c', '--config', default=None,
                        help='Config file of key=value lines. Leave unspecified for the defaults.')
    parser.add_argument('--set', action='append', metavar='KEY=VALUE',
                        help='Override one config key; may be repeated.')
    parser.add_argument('-o', '--out-dir', dest='out_dir', default=None,
                        help='Run directory, overriding out_dir of the config.')


def main():
    parser = argparse.ArgumentParser(description='Semi-supervised training with confidence-split mixing')
    sub = parser.add_subparsers(dest='subcommand', required=True)

    train = sub.add_parser('train', help='Train one run.')
    add_config_arguments(train)
    train.add_argument('--resume', default=None, help='Checkpoint to continue from.')
    train.add_argument('--dump-mixed', dest='dump_mixed', action='store_true',
                       help='Write the mixed images of the first iteration as PPM files.')
    train.add_argument('--progress', action='store_true', help='Print a progress line to stderr.')

    ev = sub.add_parser('eval', help='Score a checkpoint on the test split.')
    add_config_arguments(ev)
    ev.add_argument('checkpoint', help='Checkpoint file written by train.')

    ablate = sub.add_parser('ablate', help='Run the ablation preset grid.')
    add_config_arguments(ablate)
    ablate.add_argument('-p', '--preset', dest='presets', action='append', choices=sorted(driver.PRESETS),
                        help='Preset to run instead of the ablation grid; may be repeated.')

    sweep = sub.add_parser('sweep', help='Vary one config key over a list of values.')
    add_config_arguments(sweep)
    sweep.add_argument('values', help='key=v1,v2,... such as alpha_l=1,2,4,8,16,32')

    for p in (ablate, sweep):
        p.add_argument('--name', default=None, help="Base name of the runs. (default 'run')")
        p.add_argument('--parallel', action='store_true', help='Run independent runs as separate processes.')
        p.add_argument('output', help='Directory for the run directories and the summary.')

    plot = sub.add_parser('plot', help='SVG chart of metrics columns.')
    plot.add_argument('--columns', default=','.join(report.DEFAULT_COLUMNS),
                      help="Comma-separated metrics columns. (default '%(default)s')")
    plot.add_argument('--title', default=None)
    plot.add_argument('output', help='The generated SVG file.')
    plot.add_argument('metrics', nargs='+', help='Metrics CSV files.')

    html = sub.add_parser('report', help='HTML report of a run directory.')
    html.add_argument('--title', default=None)
    html.add_argument('run_dir', help='Run directory written by train.')
    html.add_argument('output', help='The generated HTML report.')

    args = parser.parse_args()
    sys.exit(run(args.subcommand, args))


if __name__ == '__main__':
    main()
