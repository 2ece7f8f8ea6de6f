"""
Reverse-mode automatic differentiation over dense numpy arrays.

A `Tape` records every operation whose inputs depend on a watched
parameter. Operations are appended in creation order, which is already a
topological order of the graph, so `backward` simply walks the tape in
reverse and accumulates vector-Jacobian products.
"""
from collections import OrderedDict
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np


class ShapeError(ValueError):
    pass


class NonFiniteError(ArithmeticError):
    pass


class TapeError(RuntimeError):
    pass


BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """
    A node of the computation graph. Tensors without a tape are constants:
    gradients never flow into them.
    """

    __slots__ = ('data', 'parents', 'backward_fn', 'tape', 'name')

    def __init__(
        self,
        data,
        parents: Tuple['Tensor', ...] = (),
        backward_fn: Optional[BackwardFn] = None,
        tape: Optional['Tape'] = None,
        name: Optional[str] = None,
    ) -> None:
        self.data = np.asarray(data)
        self.parents = parents
        self.backward_fn = backward_fn
        self.tape = tape
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def requires_grad(self) -> bool:
        return self.tape is not None

    def item(self) -> float:
        assert self.data.size == 1, self.shape
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        tag = f", name={self.name}" if self.name else ''
        return f"Tensor(shape={self.shape}{tag}, grad={self.requires_grad})"


class Tape:

    def __init__(self) -> None:
        self.nodes: list = []
        self.leaves: 'OrderedDict[str, Tensor]' = OrderedDict()
        self.consumed = False

    def watch(self, name: str, value: np.ndarray) -> Tensor:
        if name in self.leaves:
            raise TapeError(f"Parameter watched twice: {name}")
        leaf = Tensor(value, tape=self, name=name)
        self.leaves[name] = leaf
        return leaf

    def record(
        self,
        data: np.ndarray,
        parents: Tuple[Tensor, ...],
        backward_fn: BackwardFn,
    ) -> Tensor:
        out = Tensor(data, parents, backward_fn, tape=self)
        self.nodes.append(out)
        return out


def constant(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def detach(t: Tensor) -> Tensor:
    return Tensor(t.data.copy())


def make_node(
    data: np.ndarray,
    parents: Tuple[Tensor, ...],
    backward_fn: BackwardFn,
) -> Tensor:
    """
    Records `data` on the tape shared by the parents, or returns a constant
    if no parent requires a gradient.
    """
    tapes = {id(p.tape): p.tape for p in parents if p.tape is not None}
    if not tapes:
        return Tensor(data)
    if len(tapes) != 1:
        raise TapeError("Operation mixes tensors from different tapes")
    tape = next(iter(tapes.values()))
    if tape.consumed:
        raise TapeError("Tape already consumed")
    return tape.record(data, parents, backward_fn)


def backward(tape: Tape, loss: Tensor) -> Dict[str, np.ndarray]:
    """
    Returns the gradient of the scalar `loss` with respect to every watched
    leaf, in watch order. Leaves the loss does not depend on get zeros.
    """
    if tape.consumed:
        raise TapeError("Tape already consumed")
    if loss.data.size != 1:
        raise ShapeError(f"Loss must be a scalar, got shape {loss.shape}")
    if loss.tape is not tape:
        raise TapeError("Loss was not produced by this tape")

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        parent_grads = node.backward_fn(g)
        for parent, pg in zip(node.parents, parent_grads):
            if pg is None or parent.tape is not tape:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    tape.consumed = True

    result: Dict[str, np.ndarray] = OrderedDict()
    for name, leaf in tape.leaves.items():
        g = grads.get(id(leaf))
        if g is None:
            g = np.zeros_like(leaf.data)
        if g.shape != leaf.shape:
            raise ShapeError(f"Gradient shape {g.shape} for {name} {leaf.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"Non-finite gradient for {name}")
        result[name] = g.astype(leaf.data.dtype, copy=False)
    return result
