from dataset.core import Dataset, FormatError, UnlabeledSet
from dataset.formats import load_cifar_binary, load_idx
from dataset.glyphs import make_synthetic_glyphs
from dataset.split import SplitSpec, batch_stream, split_labeled

__all__ = [
    'Dataset',
    'FormatError',
    'UnlabeledSet',
    'SplitSpec',
    'batch_stream',
    'load_cifar_binary',
    'load_idx',
    'make_synthetic_glyphs',
    'split_labeled',
]
