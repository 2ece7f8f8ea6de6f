"""
Procedural glyph dataset: ten shape classes rendered at jittered position,
scale and rotation with a per-sample foreground colour and additive
Gaussian pixel noise. Each image is drawn from its own random stream, so
the dataset is a pure function of (seed, split, sample index).
"""
from typing import Callable, Dict, List

import numpy as np

from dataset.core import Dataset
from misc.rng import stream

MAX_CLASSES = 10
MIN_SIZE = 16

CENTER_JITTER = 0.1
SCALE_RANGE = (0.75, 1.0)
MAX_ROTATION = np.deg2rad(10.0)

Shape = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _rotate(u: np.ndarray, v: np.ndarray, angle: float):
    c, s = np.cos(angle), np.sin(angle)
    return c * u + s * v, -s * u + c * v


def _inside_square(u: np.ndarray, v: np.ndarray, half: float = 0.6) -> np.ndarray:
    return (np.abs(u) < half) & (np.abs(v) < half)


def disk(u, v):
    return u * u + v * v < 0.55 ** 2


def ring(u, v):
    r2 = u * u + v * v
    return (r2 > 0.33 ** 2) & (r2 < 0.6 ** 2)


def cross(u, v):
    return (
        ((np.abs(u) < 0.15) & (np.abs(v) < 0.6))
        | ((np.abs(v) < 0.15) & (np.abs(u) < 0.6))
    )


def bars(angle_deg: float) -> Shape:
    angle = np.deg2rad(angle_deg)

    def shape(u, v):
        ur, vr = _rotate(u, v, angle)
        stripe = np.floor((ur + 0.6) / 0.24).astype(np.int64) % 2 == 0
        return _inside_square(ur, vr) & stripe

    return shape


def triangle(u, v):
    return (v > -0.5) & (v < 0.5) & (np.abs(u) < (v + 0.5) * 0.6)


def checker(u, v):
    cells = np.floor((u + 0.6) / 0.3).astype(np.int64) + np.floor((v + 0.6) / 0.3).astype(np.int64)
    return _inside_square(u, v) & (cells % 2 == 0)


def dot_grid(u, v):
    hit = np.zeros(u.shape, dtype=bool)
    for cy in (-0.4, 0.0, 0.4):
        for cx in (-0.4, 0.0, 0.4):
            hit |= (u - cx) ** 2 + (v - cy) ** 2 < 0.12 ** 2
    return hit


SHAPES: Dict[str, Shape] = {
    'disk': disk,
    'ring': ring,
    'cross': cross,
    'bars_0': bars(0),
    'bars_45': bars(45),
    'bars_90': bars(90),
    'bars_135': bars(135),
    'triangle': triangle,
    'checker': checker,
    'dot_grid': dot_grid,
}
CLASS_NAMES: List[str] = list(SHAPES)


def render_glyph(
    class_index: int,
    size: int,
    rng: np.random.Generator,
    noise: float = 0.1,
    channels: int = 3,
) -> np.ndarray:
    """Renders one size x size x channels image of the given class."""
    center = rng.uniform(-CENTER_JITTER, CENTER_JITTER, size=2)
    scale = rng.uniform(*SCALE_RANGE)
    angle = rng.uniform(-MAX_ROTATION, MAX_ROTATION)
    color = rng.uniform(0.5, 1.0, size=channels)

    # Pixel centres in [-1, 1].
    axis = (np.arange(size) + 0.5) / size * 2.0 - 1.0
    y, x = np.meshgrid(axis, axis, indexing='ij')
    u, v = _rotate(x - center[0], y - center[1], angle)
    mask = SHAPES[CLASS_NAMES[class_index]](u / scale, v / scale)

    image = mask[:, :, None] * color[None, None, :]
    if noise > 0:
        image = image + rng.normal(0.0, noise, size=image.shape)
    return np.clip(image, 0.0, 1.0).astype(np.float32)


def make_synthetic_glyphs(
    seed: int,
    n_classes: int,
    n_per_class: int,
    size: int,
    noise: float = 0.1,
    channels: int = 3,
    split: str = 'train',
) -> Dataset:
    """
    Labels cycle through the classes (0, 1, ..., C-1, 0, 1, ...), giving
    exactly `n_per_class` examples of each.
    """
    if not 1 <= n_classes <= MAX_CLASSES:
        raise ValueError(f"n_classes must be in [1, {MAX_CLASSES}], got {n_classes}")
    if size < MIN_SIZE:
        raise ValueError(f"size must be at least {MIN_SIZE}, got {size}")
    assert channels in (1, 3), channels

    total = n_classes * n_per_class
    labels = np.arange(total, dtype=np.int64) % n_classes
    images = np.empty((total, size, size, channels), dtype=np.float32)
    purpose = f"glyphs.{split}"
    for idx in range(total):
        rng = stream(seed, purpose, index=idx)
        images[idx] = render_glyph(int(labels[idx]), size, rng, noise, channels)

    return Dataset(
        images=images,
        labels=labels,
        n_classes=n_classes,
        name=f"glyphs-{split}",
    )
