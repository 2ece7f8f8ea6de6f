"""
Finite-difference verification of the reverse-mode gradients.

Each check picks one parameter tensor and a random unit direction inside it
and compares the autodiff directional derivative with the central
difference (f(theta + h d) - f(theta - h d)) / 2h, in float64.

ReLU makes the loss piecewise smooth. When a kink falls inside the sampled
interval the central differences at h and h/2 disagree far more than the
O(h^2) truncation error allows; such directions are drawn again instead of
being scored.
"""
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from diffcore.tensor import Tape, Tensor, backward

LossFn = Callable[[Tape, Dict[str, Tensor]], Tensor]


@dataclass(frozen=True)
class GradientReport:
    errors: List[float]
    rejected: int

    @property
    def worst(self) -> float:
        return max(self.errors) if self.errors else 0.0


def relative_error(autodiff: float, numeric: float, floor: float = 1e-6) -> float:
    return abs(autodiff - numeric) / max(abs(autodiff), abs(numeric), floor)


def evaluate(loss_fn: LossFn, params: Dict[str, np.ndarray], record: bool = False):
    tape = Tape()
    leaves = {
        name: (tape.watch(name, value) if record else Tensor(value))
        for name, value in params.items()
    }
    return tape, loss_fn(tape, leaves)


def check_gradients(
    loss_fn: LossFn,
    params: Dict[str, np.ndarray],
    rng: np.random.Generator,
    directions: int = 100,
    h: float = 1e-3,
    kink_tolerance: float = 1e-4,
    max_rejections: int = 1000,
) -> GradientReport:
    """
    `loss_fn(tape, leaves)` must build a scalar loss from the leaf tensors
    using diffcore ops only.
    """
    params = {name: np.asarray(v, dtype=np.float64) for name, v in params.items()}
    tape, loss = evaluate(loss_fn, params, record=True)
    grads = backward(tape, loss)

    def f(name: str, direction: np.ndarray, step: float) -> float:
        shifted = dict(params)
        shifted[name] = params[name] + step * direction
        return evaluate(loss_fn, shifted)[1].item()

    names = list(params)
    errors: List[float] = []
    rejected = 0
    while len(errors) < directions:
        name = names[rng.integers(len(names))]
        direction = rng.standard_normal(params[name].shape)
        direction /= np.linalg.norm(direction)

        numeric = (f(name, direction, h) - f(name, direction, -h)) / (2 * h)
        half = (f(name, direction, h / 2) - f(name, direction, -h / 2)) / h
        scale = max(abs(numeric), abs(half), 1e-6)
        if abs(numeric - half) / scale > kink_tolerance:
            rejected += 1
            if rejected > max_rejections:
                raise RuntimeError("Too many directions straddle a non-differentiable point")
            continue

        autodiff = float(np.sum(grads[name] * direction))
        errors.append(relative_error(autodiff, numeric))
    return GradientReport(errors, rejected)
