"""
Weak (flip and crop) and strong (two random Pillow transforms plus cutout)
augmentation of H x W x C float images in [0, 1].
"""
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence

import numpy as np
import PIL.ImageEnhance
import PIL.ImageOps
from PIL import Image

PAD = 4
GRAY = 128
CUTOUT_FILL = 0.5
N_STRONG_OPS = 2


def flip_crop(img: np.ndarray, flip: bool, top: int, left: int, pad: int = PAD) -> np.ndarray:
    """Optional horizontal flip, reflect padding by `pad`, crop at (top, left)."""
    h, w = img.shape[:2]
    if flip:
        img = img[:, ::-1]
    padded = np.pad(img, ((pad, pad), (pad, pad), (0, 0)), mode='reflect')
    return np.ascontiguousarray(padded[top:top + h, left:left + w])


def weak_augment(img: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    flip = bool(rng.random() < 0.5)
    top = int(rng.integers(0, 2 * PAD + 1))
    left = int(rng.integers(0, 2 * PAD + 1))
    return flip_crop(img, flip, top, left)


def _to_pil(img: np.ndarray) -> Image.Image:
    pixels = np.rint(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)
    if pixels.shape[2] == 1:
        return Image.fromarray(pixels[:, :, 0])
    return Image.fromarray(pixels)


def _from_pil(pil: Image.Image, channels: int) -> np.ndarray:
    pixels = np.asarray(pil, dtype=np.float32) / np.float32(255)
    return pixels.reshape(pixels.shape[0], pixels.shape[1], channels)


def _fill(pil: Image.Image):
    return GRAY if pil.mode == 'L' else (GRAY, GRAY, GRAY)


def _signed(magnitude: float, limit: float) -> float:
    return (2.0 * magnitude - 1.0) * limit


def _affine(pil: Image.Image, coeffs) -> Image.Image:
    return pil.transform(pil.size, Image.Transform.AFFINE, coeffs, fillcolor=_fill(pil))


# Each op maps (image, magnitude in [0, 1]) to an image of the same size.
StrongOp = Callable[[Image.Image, float], Image.Image]

STRONG_OPS: Dict[str, StrongOp] = {
    'identity': lambda pil, m: pil,
    'autocontrast': lambda pil, m: PIL.ImageOps.autocontrast(pil),
    'equalize': lambda pil, m: PIL.ImageOps.equalize(pil),
    'brightness': lambda pil, m: PIL.ImageEnhance.Brightness(pil).enhance(0.1 + 1.8 * m),
    'contrast': lambda pil, m: PIL.ImageEnhance.Contrast(pil).enhance(0.1 + 1.8 * m),
    'sharpness': lambda pil, m: PIL.ImageEnhance.Sharpness(pil).enhance(0.1 + 1.8 * m),
    'posterize': lambda pil, m: PIL.ImageOps.posterize(pil, min(8, 4 + int(m * 5))),
    'solarize': lambda pil, m: PIL.ImageOps.solarize(pil, int(round(255 * (1.0 - m)))),
    'rotate': lambda pil, m: pil.rotate(_signed(m, 30.0), fillcolor=_fill(pil)),
    'shear_x': lambda pil, m: _affine(pil, (1, _signed(m, 0.3), 0, 0, 1, 0)),
    'shear_y': lambda pil, m: _affine(pil, (1, 0, 0, _signed(m, 0.3), 1, 0)),
    'translate_x': lambda pil, m: _affine(pil, (1, 0, _signed(m, 0.3) * pil.size[0], 0, 1, 0)),
    'translate_y': lambda pil, m: _affine(pil, (1, 0, 0, 0, 1, _signed(m, 0.3) * pil.size[1])),
}


def cutout(img: np.ndarray, top: int, left: int, side: int) -> np.ndarray:
    out = img.copy()
    out[top:top + side, left:left + side] = CUTOUT_FILL
    return out


def strong_augment(
    img: np.ndarray,
    rng: np.random.Generator,
    ops: Optional[Sequence[str]] = None,
    use_cutout: bool = True,
) -> np.ndarray:
    """
    weak_augment, then N_STRONG_OPS transforms drawn with replacement from
    `ops` (default: the full pool), each at a uniform random magnitude,
    then a square cutout of half the image side.
    """
    pool = list(STRONG_OPS) if ops is None else list(ops)
    out = weak_augment(img, rng)

    picks = [pool[int(rng.integers(len(pool)))] for _ in range(N_STRONG_OPS)]
    magnitudes = [float(rng.random()) for _ in range(N_STRONG_OPS)]
    if any(name != 'identity' for name in picks):
        pil = _to_pil(out)
        for name, magnitude in zip(picks, magnitudes):
            pil = STRONG_OPS[name](pil, magnitude)
        out = _from_pil(pil, img.shape[2])

    if use_cutout:
        h, w = out.shape[:2]
        side = min(h, w) // 2
        top = int(rng.integers(0, h - side + 1))
        left = int(rng.integers(0, w - side + 1))
        out = cutout(out, top, left, side)
    return out


@dataclass(frozen=True)
class AugmentPolicy:
    kind: str
    ops: Sequence[str] = tuple(STRONG_OPS)
    use_cutout: bool = True

    def __post_init__(self) -> None:
        assert self.kind in ('weak', 'strong'), self.kind
        unknown = set(self.ops).difference(STRONG_OPS)
        assert not unknown, f"Unknown augmentation ops: {sorted(unknown)}"

    @classmethod
    def weak(cls) -> 'AugmentPolicy':
        return cls('weak')

    @classmethod
    def strong(cls, use_cutout: bool = True) -> 'AugmentPolicy':
        return cls('strong', use_cutout=use_cutout)

    def __call__(self, img: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.kind == 'weak':
            return weak_augment(img, rng)
        return strong_augment(img, rng, self.ops, self.use_cutout)
