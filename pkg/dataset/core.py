"""
In-memory image datasets. Pixels are stored as float32 in [0, 1], laid out
N x H x W x C; standardisation happens at the model input.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

MIN_SIDE = 8


class FormatError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray
    labels: np.ndarray
    n_classes: int
    name: str
    source_indices: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        assert self.images.ndim == 4, self.images.shape
        assert self.images.shape[0] == self.labels.shape[0], (self.images.shape, self.labels.shape)
        assert self.images.shape[1] >= MIN_SIDE and self.images.shape[2] >= MIN_SIDE, self.images.shape
        assert self.images.shape[3] in (1, 3), self.images.shape
        if len(self.labels):
            assert 0 <= self.labels.min() and self.labels.max() < self.n_classes

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def image_shape(self):
        return self.images.shape[1:]

    @property
    def channels(self) -> int:
        return self.images.shape[3]

    def class_histogram(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, indices: np.ndarray, name: Optional[str] = None) -> 'Dataset':
        indices = np.asarray(indices, dtype=np.int64)
        return self.__class__(
            images=self.images[indices],
            labels=self.labels[indices],
            n_classes=self.n_classes,
            name=name or self.name,
            source_indices=indices,
        )


class UnlabeledSet:
    """
    Images used without labels. The ground truth travels along only for
    diagnostics (purity, reliability); it is reachable through
    `diagnostic_labels()` and nothing on the training path calls it.
    """

    def __init__(
        self,
        images: np.ndarray,
        hidden_labels: np.ndarray,
        n_classes: int,
        name: str,
        source_indices: np.ndarray,
    ) -> None:
        assert images.shape[0] == hidden_labels.shape[0] == source_indices.shape[0]
        self.images = images
        self._hidden_labels = hidden_labels
        self.n_classes = n_classes
        self.name = name
        self.source_indices = source_indices

    def __len__(self) -> int:
        return self.images.shape[0]

    def __repr__(self) -> str:
        return f"UnlabeledSet(name={self.name!r}, size={len(self)})"

    def diagnostic_labels(self) -> np.ndarray:
        return self._hidden_labels


def to_nchw(images: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(images.transpose(0, 3, 1, 2), dtype=np.float32)


def channel_statistics(images: np.ndarray):
    """Per-channel mean and standard deviation over N x H x W x C pixels."""
    mean = images.mean(axis=(0, 1, 2), dtype=np.float64)
    std = images.std(axis=(0, 1, 2), dtype=np.float64)
    return mean.astype(np.float32), np.maximum(std, 1e-3).astype(np.float32)
