"""
The mixing operator. The first operand is the base (target) image, the
second is the source: resized and pasted for ResizeMix, blended for Mixup.
Mixed labels always weight the source by the realised mixing fraction.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from PIL import Image

from diffcore.tensor import ShapeError

LAMBDA_EPS = 1e-6
UNIFORM_SCALE = (0.1, 0.8)
STRATEGIES = ('resizemix', 'resizemix_uniform', 'mixup')


@dataclass(frozen=True)
class PatchRect:
    top: int
    left: int
    height: int
    width: int

    def __post_init__(self) -> None:
        assert self.height >= 1 and self.width >= 1, self

    @property
    def area(self) -> int:
        return self.height * self.width

    def fits(self, height: int, width: int) -> bool:
        return (
            0 <= self.top and self.top + self.height <= height
            and 0 <= self.left and self.left + self.width <= width
        )


@dataclass(frozen=True)
class MixOutcome:
    image: np.ndarray
    label: np.ndarray
    lam: float
    rect: Optional[PatchRect] = None


def sample_lambda(alpha: float, rng: np.random.Generator) -> float:
    if not alpha > 0:
        raise ValueError(f"Beta parameter must be positive, got {alpha}")
    lam = float(rng.beta(alpha, alpha))
    return min(max(lam, LAMBDA_EPS), 1.0 - LAMBDA_EPS)


def resize_bilinear(img: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize of an H x W x C float image, one float plane at a time."""
    planes = []
    for c in range(img.shape[2]):
        plane = Image.fromarray(np.ascontiguousarray(img[:, :, c], dtype=np.float32))
        resized = plane.resize((width, height), Image.Resampling.BILINEAR)
        planes.append(np.asarray(resized, dtype=np.float32))
    return np.clip(np.stack(planes, axis=2), 0.0, 1.0)


def _check_operands(a: np.ndarray, ya: np.ndarray, b: np.ndarray, yb: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"Cannot mix images of shape {a.shape} and {b.shape}")
    if ya.shape != yb.shape:
        raise ShapeError(f"Cannot mix labels of shape {ya.shape} and {yb.shape}")


def paste(
    target: np.ndarray,
    y_target: np.ndarray,
    source: np.ndarray,
    y_source: np.ndarray,
    scale: float,
    rng: np.random.Generator,
) -> MixOutcome:
    """Pastes `source`, resized by `scale` per side, at a uniform random position."""
    _check_operands(target, y_target, source, y_source)
    h, w = target.shape[:2]
    ph = min(h, max(1, int(round(scale * h))))
    pw = min(w, max(1, int(round(scale * w))))
    top = int(rng.integers(0, h - ph + 1))
    left = int(rng.integers(0, w - pw + 1))
    rect = PatchRect(top, left, ph, pw)

    mixed = target.copy()
    mixed[top:top + ph, left:left + pw] = resize_bilinear(source, ph, pw)
    # The realised area, not the sampled one, weights the labels.
    lam = rect.area / (h * w)
    label = (1.0 - lam) * np.asarray(y_target, np.float64) + lam * np.asarray(y_source, np.float64)
    return MixOutcome(mixed, label, lam, rect)


def resizemix(
    target: np.ndarray,
    y_target: np.ndarray,
    source: np.ndarray,
    y_source: np.ndarray,
    alpha: float,
    rng: np.random.Generator,
    lam: Optional[float] = None,
) -> MixOutcome:
    """Patch side scale is sqrt(lambda), so the area ratio follows Beta(alpha, alpha)."""
    _check_operands(target, y_target, source, y_source)
    if lam is None:
        lam = sample_lambda(alpha, rng)
    return paste(target, y_target, source, y_source, float(np.sqrt(lam)), rng)


def resizemix_uniform(
    target: np.ndarray,
    y_target: np.ndarray,
    source: np.ndarray,
    y_source: np.ndarray,
    alpha: float,
    rng: np.random.Generator,
) -> MixOutcome:
    """Unmodified ResizeMix: the side scale itself is uniform; `alpha` is unused."""
    _check_operands(target, y_target, source, y_source)
    scale = float(rng.uniform(*UNIFORM_SCALE))
    return paste(target, y_target, source, y_source, scale, rng)


def mixup(
    a: np.ndarray,
    y_a: np.ndarray,
    b: np.ndarray,
    y_b: np.ndarray,
    alpha: float,
    rng: np.random.Generator,
    lam: Optional[float] = None,
) -> MixOutcome:
    _check_operands(a, y_a, b, y_b)
    if lam is None:
        lam = sample_lambda(alpha, rng)
    image = (np.float32(lam) * a + np.float32(1.0 - lam) * b).astype(np.float32)
    label = lam * np.asarray(y_a, np.float64) + (1.0 - lam) * np.asarray(y_b, np.float64)
    return MixOutcome(np.clip(image, 0.0, 1.0), label, float(lam))


def mix(
    strategy: str,
    target: np.ndarray,
    y_target: np.ndarray,
    source: np.ndarray,
    y_source: np.ndarray,
    alpha: float,
    rng: np.random.Generator,
) -> MixOutcome:
    if strategy == 'resizemix':
        return resizemix(target, y_target, source, y_source, alpha, rng)
    if strategy == 'resizemix_uniform':
        return resizemix_uniform(target, y_target, source, y_source, alpha, rng)
    if strategy == 'mixup':
        # The base image carries weight lambda here.
        return mixup(target, y_target, source, y_source, alpha, rng)
    raise ValueError(f"Unknown mixing strategy: {strategy}")


def dump_ppm(path: str, image: np.ndarray) -> None:
    """Writes an H x W x C image in [0, 1] as an 8-bit binary PPM (P6)."""
    pixels = np.rint(np.clip(image, 0.0, 1.0) * 255).astype(np.uint8)
    if pixels.shape[2] == 1:
        pil = Image.fromarray(pixels[:, :, 0]).convert('RGB')
    else:
        pil = Image.fromarray(pixels)
    pil.save(path, format='PPM')
