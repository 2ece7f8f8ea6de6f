"""
Resolves the dataset named in a config into train and test splits.
"""
import glob
import os
from typing import Tuple

from dataset.core import Dataset
from dataset.formats import load_cifar_batches, load_idx
from dataset.glyphs import make_synthetic_glyphs
from misc.logger import create_logger
from trainer.config import TrainConfig

logger = create_logger('trainer.sources')

IDX_FILES = {
    'train': ('train-images-idx3-ubyte', 'train-labels-idx1-ubyte'),
    'test': ('t10k-images-idx3-ubyte', 't10k-labels-idx1-ubyte'),
}


def load_splits(config: TrainConfig) -> Tuple[Dataset, Dataset]:
    if config.dataset == 'synthetic':
        train = make_synthetic_glyphs(
            config.data_seed, config.synthetic_classes, config.synthetic_per_class,
            config.image_size, split='train',
        )
        test = make_synthetic_glyphs(
            config.data_seed, config.synthetic_classes, config.synthetic_test_per_class,
            config.image_size, split='test',
        )
    elif config.dataset == 'idx':
        root = os.path.expanduser(config.data_path)
        train, test = (
            load_idx(
                os.path.join(root, images), os.path.join(root, labels),
                n_classes=10, name=f"idx-{split}",
            )
            for split, (images, labels) in IDX_FILES.items()
        )
    elif config.dataset == 'cifar':
        root = os.path.expanduser(config.data_path)
        batches = sorted(glob.glob(os.path.join(root, 'data_batch_*.bin')))
        if not batches:
            raise FileNotFoundError(f"No data_batch_*.bin files in {root}")
        train = load_cifar_batches(batches, name='cifar10-train')
        test = load_cifar_batches([os.path.join(root, 'test_batch.bin')], name='cifar10-test')
    else:
        assert False, f"Unhandled dataset: {config.dataset}"

    logger.info(f"Loaded {train.name} ({len(train)}) and {test.name} ({len(test)})")
    return train, test
