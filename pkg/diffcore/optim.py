"""
SGD with classical momentum and coupled weight decay, plus the parameter
exponential moving average used for evaluation.
"""
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict

import numpy as np

from diffcore.model import ParameterSet
from diffcore.tensor import ShapeError


@dataclass(frozen=True)
class OptimizerState:
    lr: float
    momentum: float
    weight_decay: float
    velocity: 'OrderedDict[str, np.ndarray]'

    @classmethod
    def zeros(
        cls,
        params: ParameterSet,
        lr: float,
        momentum: float,
        weight_decay: float,
    ) -> 'OptimizerState':
        velocity = OrderedDict(
            (name, np.zeros_like(params[name])) for name in params.trainable()
        )
        return cls(lr, momentum, weight_decay, velocity)

    def with_lr(self, lr: float) -> 'OptimizerState':
        return self.__class__(lr, self.momentum, self.weight_decay, self.velocity)


def sgd_step(
    params: ParameterSet,
    grads: Dict[str, np.ndarray],
    opt: OptimizerState,
):
    """
    v <- momentum * v + g + weight_decay * theta
    theta <- theta - lr * v

    Returns the updated parameters and optimizer state.
    """
    updated: Dict[str, np.ndarray] = {}
    velocity: 'OrderedDict[str, np.ndarray]' = OrderedDict()
    for name, v in opt.velocity.items():
        theta = params[name]
        g = grads[name]
        if g.shape != theta.shape or v.shape != theta.shape:
            raise ShapeError(f"{name}: parameter {theta.shape}, gradient {g.shape}, velocity {v.shape}")
        dtype = theta.dtype.type
        v_new = dtype(opt.momentum) * v + g + dtype(opt.weight_decay) * theta
        updated[name] = (theta - dtype(opt.lr) * v_new).astype(theta.dtype)
        velocity[name] = v_new.astype(theta.dtype)
    return params.replace(updated), OptimizerState(opt.lr, opt.momentum, opt.weight_decay, velocity)


@dataclass(frozen=True)
class EmaState:
    decay: float
    shadow: ParameterSet

    @classmethod
    def of(cls, params: ParameterSet, decay: float) -> 'EmaState':
        assert 0.0 <= decay <= 1.0, decay
        return cls(decay, params.copy())


def ema_update(ema: EmaState, params: ParameterSet) -> EmaState:
    """shadow <- d * shadow + (1 - d) * params, for every tensor."""
    ema.shadow.check_aligned(params)
    updated: Dict[str, np.ndarray] = {}
    for name, shadow in ema.shadow.items():
        dtype = shadow.dtype.type
        d = dtype(ema.decay)
        if ema.decay == 0.0:
            updated[name] = params[name].copy()
        elif ema.decay == 1.0:
            updated[name] = shadow
        else:
            updated[name] = (d * shadow + (dtype(1) - d) * params[name]).astype(shadow.dtype)
    return EmaState(ema.decay, ema.shadow.replace(updated))
