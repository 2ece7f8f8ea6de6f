"""
Everything a run needs to continue: parameters, optimizer, parameter EMA,
threshold statistics and counters, and its checkpoint encoding.
"""
import os
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict

import numpy as np

from confidence.threshold import ThresholdState
from diffcore import checkpoint
from diffcore.model import ParameterSet, is_buffer
from diffcore.optim import EmaState, OptimizerState
from trainer.config import TrainConfig

EMA_SUFFIX = '.ema'
VEL_SUFFIX = '.vel'
TAU_GLOBAL = 'threshold.tau_global.f64'
CLASS_EXPECTATION = 'threshold.class_expectation.f64'
ITERATION = 'run.iteration.u64'
SEED = 'run.seed.u64'
WALL_CLOCK = 'run.wall_clock.f64'


@dataclass(frozen=True)
class RunState:
    iteration: int
    params: ParameterSet
    opt: OptimizerState
    ema: EmaState
    threshold: ThresholdState
    seed: int
    wall_clock: float = 0.0

    @classmethod
    def fresh(
        cls,
        config: TrainConfig,
        params: ParameterSet,
        n_classes: int,
    ) -> 'RunState':
        return cls(
            iteration=0,
            params=params,
            opt=OptimizerState.zeros(params, config.lr, config.momentum, config.weight_decay),
            ema=EmaState.of(params, config.param_ema),
            threshold=ThresholdState.initial(
                config.threshold_mode, n_classes, config.threshold_ema, config.tau_fixed,
            ),
            seed=config.seed,
        )


def to_tensors(state: RunState) -> 'OrderedDict[str, np.ndarray]':
    tensors: 'OrderedDict[str, np.ndarray]' = OrderedDict()
    for name, value in state.params.items():
        tensors[name] = value
    for name, value in state.ema.shadow.items():
        tensors[name + EMA_SUFFIX] = value
    for name, value in state.opt.velocity.items():
        tensors[name + VEL_SUFFIX] = value
    tensors[TAU_GLOBAL] = checkpoint.pack_f64([state.threshold.tau_global])
    tensors[CLASS_EXPECTATION] = checkpoint.pack_f64(state.threshold.class_expectation)
    tensors[ITERATION] = checkpoint.pack_u64(state.iteration)
    tensors[SEED] = checkpoint.pack_u64(state.seed)
    tensors[WALL_CLOCK] = checkpoint.pack_f64([state.wall_clock])
    return tensors


def from_tensors(tensors: Dict[str, np.ndarray], config: TrainConfig) -> RunState:
    scalar_names = {TAU_GLOBAL, CLASS_EXPECTATION, ITERATION, SEED, WALL_CLOCK}
    missing = scalar_names.difference(tensors)
    if missing:
        raise checkpoint.CheckpointError(f"Checkpoint lacks {', '.join(sorted(missing))}")

    names = [
        n for n in tensors
        if n not in scalar_names and not n.endswith((EMA_SUFFIX, VEL_SUFFIX))
    ]
    buffers = [n for n in names if is_buffer(n)]
    params = ParameterSet(OrderedDict((n, tensors[n]) for n in names), buffers)

    def suffixed(suffix: str, subset) -> 'OrderedDict[str, np.ndarray]':
        out: 'OrderedDict[str, np.ndarray]' = OrderedDict()
        for name in subset:
            key = name + suffix
            if key not in tensors:
                raise checkpoint.CheckpointError(f"Checkpoint lacks {key}")
            out[name] = tensors[key]
        return out

    shadow = ParameterSet(suffixed(EMA_SUFFIX, names), buffers)
    velocity = suffixed(VEL_SUFFIX, params.trainable())
    params.check_aligned(shadow)

    threshold = ThresholdState(
        mode=config.threshold_mode,
        tau_fixed=config.tau_fixed,
        tau_global=float(checkpoint.unpack_f64(tensors[TAU_GLOBAL])[0]),
        class_expectation=checkpoint.unpack_f64(tensors[CLASS_EXPECTATION]),
        decay=config.threshold_ema,
    )
    return RunState(
        iteration=checkpoint.unpack_u64(tensors[ITERATION]),
        params=params,
        opt=OptimizerState(config.lr, config.momentum, config.weight_decay, velocity),
        ema=EmaState(config.param_ema, shadow),
        threshold=threshold,
        seed=checkpoint.unpack_u64(tensors[SEED]),
        wall_clock=float(checkpoint.unpack_f64(tensors[WALL_CLOCK])[0]),
    )


def checkpoint_name(iteration: int) -> str:
    return f"checkpoint_{iteration:07d}.rmm"


def save_checkpoint(path: str, state: RunState) -> None:
    tmp = path + '.tmp'
    checkpoint.save(tmp, to_tensors(state))
    os.replace(tmp, path)


def load_checkpoint(path: str, config: TrainConfig) -> RunState:
    return from_tensors(checkpoint.load(path), config)
