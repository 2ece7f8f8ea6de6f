"""
Parameters, initialisation and forward pass of SmallConvNet, the fixed
desk-scale classifier: three stages of [conv3x3 -> batch-norm -> ReLU] x 2
with stride-2 downsampling at the start of stages two and three, global
average pooling and one linear head.
"""
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, Optional, Sequence, Tuple

import numpy as np

from diffcore import ops
from diffcore.tensor import NonFiniteError, ShapeError, Tape, Tensor, backward

WIDTHS = (32, 64, 128)
BN_MOMENTUM = 0.1


class ParameterSet:
    """
    Named, ordered collection of arrays. Names listed in `buffers` (running
    statistics, input standardisation) are carried along but never trained.
    """

    def __init__(
        self,
        tensors: 'OrderedDict[str, np.ndarray]',
        buffers: Sequence[str] = (),
    ) -> None:
        self._tensors: 'OrderedDict[str, np.ndarray]' = OrderedDict(tensors)
        self.buffers = frozenset(buffers)
        unknown = self.buffers.difference(self._tensors)
        assert not unknown, f"Unknown buffers: {sorted(unknown)}"

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def names(self) -> Tuple[str, ...]:
        return tuple(self._tensors)

    def items(self):
        return self._tensors.items()

    def trainable(self) -> Tuple[str, ...]:
        return tuple(n for n in self._tensors if n not in self.buffers)

    def replace(self, updates: Dict[str, np.ndarray]) -> 'ParameterSet':
        tensors = OrderedDict(self._tensors)
        for name, value in updates.items():
            if name not in tensors:
                raise KeyError(name)
            if value.shape != tensors[name].shape:
                raise ShapeError(f"{name}: {value.shape} != {tensors[name].shape}")
            tensors[name] = value
        return self.__class__(tensors, self.buffers)

    def copy(self) -> 'ParameterSet':
        return self.__class__(
            OrderedDict((n, v.copy()) for n, v in self._tensors.items()),
            self.buffers,
        )

    def astype(self, dtype) -> 'ParameterSet':
        return self.__class__(
            OrderedDict((n, v.astype(dtype)) for n, v in self._tensors.items()),
            self.buffers,
        )

    def check_aligned(self, other: 'ParameterSet', names: Optional[Sequence[str]] = None) -> None:
        for name in (self.names() if names is None else names):
            if name not in other:
                raise ShapeError(f"Missing tensor: {name}")
            if self[name].shape != other[name].shape:
                raise ShapeError(f"{name}: {self[name].shape} != {other[name].shape}")


@dataclass
class PredictionBatch:
    """
    Probability vectors of one forward pass. `probs` is a graph node when
    the pass was recorded on a tape.
    """
    probs: Tensor
    running_stats: Dict[str, np.ndarray] = field(default_factory=dict)
    tape: Optional[Tape] = None

    @classmethod
    def from_probabilities(cls, q) -> 'PredictionBatch':
        return cls(Tensor(np.asarray(q)))

    @property
    def q(self) -> np.ndarray:
        return self.probs.data

    @property
    def pseudo_labels(self) -> np.ndarray:
        return np.argmax(self.q, axis=1)

    @property
    def confidence(self) -> np.ndarray:
        return np.max(self.q, axis=1)

    def __len__(self) -> int:
        return self.q.shape[0]


def conv_names(stage: int, layer: int) -> Dict[str, str]:
    prefix = f"stage{stage}"
    return {
        'weight': f"{prefix}.conv{layer}.weight",
        'scale': f"{prefix}.bn{layer}.scale",
        'shift': f"{prefix}.bn{layer}.shift",
        'running_mean': f"{prefix}.bn{layer}.running_mean",
        'running_var': f"{prefix}.bn{layer}.running_var",
    }


def he_uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


def init_small_convnet(
    rng: np.random.Generator,
    in_channels: int,
    n_classes: int,
    input_mean: Optional[np.ndarray] = None,
    input_std: Optional[np.ndarray] = None,
    widths: Sequence[int] = WIDTHS,
) -> ParameterSet:
    tensors: 'OrderedDict[str, np.ndarray]' = OrderedDict()
    buffers = ['input.mean', 'input.std']
    tensors['input.mean'] = (
        np.zeros(in_channels, np.float32) if input_mean is None
        else np.asarray(input_mean, np.float32)
    )
    tensors['input.std'] = (
        np.ones(in_channels, np.float32) if input_std is None
        else np.asarray(input_std, np.float32)
    )

    c_in = in_channels
    for stage, width in enumerate(widths, start=1):
        for layer in (1, 2):
            names = conv_names(stage, layer)
            tensors[names['weight']] = he_uniform(rng, (width, c_in, 3, 3), c_in * 9)
            tensors[names['scale']] = np.ones(width, np.float32)
            tensors[names['shift']] = np.zeros(width, np.float32)
            tensors[names['running_mean']] = np.zeros(width, np.float32)
            tensors[names['running_var']] = np.ones(width, np.float32)
            buffers += [names['running_mean'], names['running_var']]
            c_in = width

    tensors['head.weight'] = he_uniform(rng, (n_classes, c_in), c_in)
    tensors['head.bias'] = np.zeros(n_classes, np.float32)
    return ParameterSet(tensors, buffers)


def n_stages(params: ParameterSet) -> int:
    stage = 0
    while f"stage{stage + 1}.conv1.weight" in params:
        stage += 1
    return stage


def is_buffer(name: str) -> bool:
    """Input standardisation and running statistics are never trained."""
    return name.startswith('input.') or name.endswith(('.running_mean', '.running_var'))


def run_network(
    params: ParameterSet,
    batch: np.ndarray,
    train: bool,
    param: Optional[Callable[[str], Tensor]] = None,
) -> Tuple[Tensor, Dict[str, np.ndarray]]:
    """
    The SmallConvNet graph. `param` maps a trainable name to the tensor to
    use for it (a watched leaf, or a constant when nothing is recorded).
    Returns the class probabilities and, in train mode, the updated
    running statistics.
    """
    if param is None:
        def param(name: str) -> Tensor:
            return Tensor(params[name])

    in_channels = params['input.mean'].shape[0]
    if batch.ndim != 4 or batch.shape[1] != in_channels:
        raise ShapeError(
            f"Expected a batch of shape N x {in_channels} x H x W, got {batch.shape}"
        )
    dtype = params['head.weight'].dtype
    mean = params['input.mean'].astype(dtype)[None, :, None, None]
    std = params['input.std'].astype(dtype)[None, :, None, None]
    x = Tensor(((batch.astype(dtype) - mean) / std).astype(dtype))

    running: Dict[str, np.ndarray] = OrderedDict()
    for stage in range(1, n_stages(params) + 1):
        for layer in (1, 2):
            names = conv_names(stage, layer)
            stride = 2 if stage > 1 and layer == 1 else 1
            x = ops.conv2d(x, param(names['weight']), stride=stride)
            x, new_mean, new_var = ops.batch_norm(
                x,
                param(names['scale']),
                param(names['shift']),
                params[names['running_mean']],
                params[names['running_var']],
                train=train,
                momentum=BN_MOMENTUM,
            )
            if train:
                running[names['running_mean']] = new_mean
                running[names['running_var']] = new_var
            x = ops.relu(x)

    x = ops.global_avg_pool(x)
    logits = ops.linear(x, param('head.weight'), param('head.bias'))
    probs = ops.softmax(logits)
    if not np.all(np.isfinite(probs.data)):
        raise NonFiniteError("Non-finite activation in forward pass")
    return probs, running


def forward(
    params: ParameterSet,
    batch: np.ndarray,
    mode: str = 'eval',
    record: Optional[bool] = None,
) -> PredictionBatch:
    """
    Runs the classifier on an NCHW batch of [0, 1] pixels. In train mode the
    batch-norm layers normalise with batch statistics and the pass is
    recorded on a fresh tape (unless `record` is False); in eval mode the
    running statistics are used.
    """
    assert mode in ('train', 'eval'), mode
    train = mode == 'train'
    if record is None:
        record = train
    tape = Tape() if record else None

    def param(name: str) -> Tensor:
        if tape is not None:
            return tape.watch(name, params[name])
        return Tensor(params[name])

    probs, running = run_network(params, batch, train, param)
    if tape is not None:
        # Parameters the graph never touched still get (zero) gradients.
        for name in params.trainable():
            if name not in tape.leaves:
                tape.watch(name, params[name])
    return PredictionBatch(probs, running, tape)


def gradients(prediction: PredictionBatch, loss: Tensor) -> Dict[str, np.ndarray]:
    """Backward pass for a loss built on top of a recorded forward pass."""
    assert prediction.tape is not None, "Forward pass was not recorded"
    return backward(prediction.tape, loss)
