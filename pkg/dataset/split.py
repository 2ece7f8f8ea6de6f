"""
Labeled/unlabeled splitting and the endless batch stream that feeds the
trainer B labeled and mu * B unlabeled indices per iteration.
"""
from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np

from dataset.core import Dataset, UnlabeledSet
from misc.rng import stream


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    labels_per_class: int
    seed: int
    include_labeled_in_unlabeled: bool = True

    def check(self, ds: Dataset) -> None:
        if self.labels_per_class < 1:
            raise SplitError(f"labels_per_class must be positive, got {self.labels_per_class}")
        if self.labels_per_class * ds.n_classes > len(ds):
            raise SplitError(
                f"{self.labels_per_class} x {ds.n_classes} labels exceed dataset size {len(ds)}"
            )


def split_labeled(ds: Dataset, spec: SplitSpec) -> Tuple[Dataset, UnlabeledSet]:
    spec.check(ds)
    chosen = []
    for cls in range(ds.n_classes):
        members = np.flatnonzero(ds.labels == cls)
        if len(members) < spec.labels_per_class:
            raise SplitError(
                f"Class {cls} has {len(members)} examples, {spec.labels_per_class} required"
            )
        order = stream(spec.seed, 'split.labeled', index=cls).permutation(len(members))
        chosen.append(members[order[:spec.labels_per_class]])
    labeled_idx = np.sort(np.concatenate(chosen))

    if spec.include_labeled_in_unlabeled:
        unlabeled_idx = np.arange(len(ds), dtype=np.int64)
    else:
        keep = np.ones(len(ds), dtype=bool)
        keep[labeled_idx] = False
        unlabeled_idx = np.flatnonzero(keep)

    labeled = ds.subset(labeled_idx, name=f"{ds.name}-labeled")
    unlabeled = UnlabeledSet(
        images=ds.images[unlabeled_idx],
        hidden_labels=ds.labels[unlabeled_idx],
        n_classes=ds.n_classes,
        name=f"{ds.name}-unlabeled",
        source_indices=unlabeled_idx,
    )
    return labeled, unlabeled


class IndexStream:
    """
    Endless sequence of indices into a set of `size` elements. Epoch e
    visits the permutation drawn from stream (seed, tag, iteration=e), so
    the position after any number of draws can be recomputed directly.
    """

    def __init__(self, size: int, seed: int, tag: str, position: int = 0) -> None:
        self.size = size
        self.seed = seed
        self.tag = tag
        self.position = position
        self._epoch = -1
        self._order = np.empty(0, dtype=np.int64)

    def _permutation(self, epoch: int) -> np.ndarray:
        if epoch != self._epoch:
            self._order = stream(self.seed, self.tag, iteration=epoch).permutation(self.size)
            self._epoch = epoch
        return self._order

    def take(self, count: int) -> np.ndarray:
        out = np.empty(count, dtype=np.int64)
        if self.size == 0:
            assert count == 0, "Cannot draw from an empty set"
            return out
        for k in range(count):
            epoch, offset = divmod(self.position, self.size)
            out[k] = self._permutation(epoch)[offset]
            self.position += 1
        return out


def batch_stream(
    labeled: Dataset,
    unlabeled: UnlabeledSet,
    batch_size: int,
    mu: int,
    seed: int,
    start: int = 0,
) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """
    Yields (labeled indices, unlabeled indices) forever. `start` skips that
    many iterations, which is how a resumed run continues the same
    sequence. An empty unlabeled set yields empty unlabeled batches.
    """
    if len(labeled) == 0:
        raise ValueError("Labeled set is empty")
    assert batch_size >= 1 and mu >= 1, (batch_size, mu)
    n_unlabeled = mu * batch_size if len(unlabeled) else 0

    labeled_idx = IndexStream(len(labeled), seed, 'batch.labeled', start * batch_size)
    unlabeled_idx = IndexStream(len(unlabeled), seed, 'batch.unlabeled', start * n_unlabeled)
    while True:
        yield labeled_idx.take(batch_size), unlabeled_idx.take(n_unlabeled)
