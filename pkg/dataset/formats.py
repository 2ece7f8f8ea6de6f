"""
Readers for the two standard on-disk formats.

IDX (MNIST): big-endian magic 0x0000 08 0D where 0x08 marks unsigned bytes
and D the number of dimensions, then D big-endian u32 extents and the raw
payload. Images use 0x00000803, labels 0x00000801.

CIFAR-10 binary: a sequence of 3073-byte records, one label byte followed by
the 32x32 red, green and blue planes.
"""
import os
import struct
from typing import List, Optional, Sequence

import numpy as np

from dataset.core import Dataset, FormatError
from misc.logger import create_logger

logger = create_logger('dataset.formats')

IDX_UBYTE = 0x08
IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_SIDE = 32
CIFAR_RECORD = 1 + 3 * CIFAR_SIDE * CIFAR_SIDE


def parse_idx(blob: bytes, expected_magic: Optional[int] = None) -> np.ndarray:
    if len(blob) < 4:
        raise FormatError("Truncated IDX header")
    (magic,) = struct.unpack('>I', blob[:4])
    if magic >> 16 != 0 or (magic >> 8) & 0xff != IDX_UBYTE:
        raise FormatError(f"Bad IDX magic: {magic:#010x}")
    if expected_magic is not None and magic != expected_magic:
        raise FormatError(f"Bad IDX magic: {magic:#010x}, expected {expected_magic:#010x}")
    ndim = magic & 0xff
    header = 4 + 4 * ndim
    if len(blob) < header:
        raise FormatError("Truncated IDX header")
    dims = struct.unpack(f'>{ndim}I', blob[4:header])
    size = int(np.prod(dims, dtype=np.int64))
    payload = blob[header:]
    if len(payload) < size:
        raise FormatError(f"Truncated IDX payload: {len(payload)} of {size} bytes")
    if len(payload) > size:
        logger.warning(f"Ignoring {len(payload) - size} trailing bytes in IDX file")
    return np.frombuffer(payload, dtype=np.uint8, count=size).reshape(dims)


def read_idx(path: str, expected_magic: Optional[int] = None) -> np.ndarray:
    with open(path, 'rb') as fp:
        return parse_idx(fp.read(), expected_magic)


def load_idx(
    images_path: str,
    labels_path: str,
    n_classes: Optional[int] = None,
    name: Optional[str] = None,
) -> Dataset:
    images = read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = read_idx(labels_path, IDX_LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise FormatError(
            f"{images.shape[0]} images but {labels.shape[0]} labels"
        )
    labels = labels.astype(np.int64)
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if len(labels) else 1
    pixels = (images.astype(np.float32) / np.float32(255))[..., None]
    return Dataset(
        images=pixels,
        labels=labels,
        n_classes=n_classes,
        name=name or os.path.basename(images_path),
    )


def parse_cifar_binary(blob: bytes) -> np.ndarray:
    if len(blob) % CIFAR_RECORD != 0:
        raise FormatError(
            f"CIFAR binary length {len(blob)} is not a multiple of {CIFAR_RECORD}"
        )
    return np.frombuffer(blob, dtype=np.uint8).reshape(-1, CIFAR_RECORD)


def load_cifar_binary(
    path: str,
    n_classes: int = 10,
    name: Optional[str] = None,
) -> Dataset:
    with open(path, 'rb') as fp:
        records = parse_cifar_binary(fp.read())
    return _cifar_dataset([records], n_classes, name or os.path.basename(path))


def load_cifar_batches(
    paths: Sequence[str],
    n_classes: int = 10,
    name: str = 'cifar10',
) -> Dataset:
    chunks: List[np.ndarray] = []
    for path in paths:
        with open(path, 'rb') as fp:
            chunks.append(parse_cifar_binary(fp.read()))
    return _cifar_dataset(chunks, n_classes, name)


def _cifar_dataset(chunks: List[np.ndarray], n_classes: int, name: str) -> Dataset:
    records = np.concatenate(chunks, axis=0)
    labels = records[:, 0].astype(np.int64)
    planes = records[:, 1:].reshape(-1, 3, CIFAR_SIDE, CIFAR_SIDE)
    # Channel planes to per-pixel RGB triples.
    pixels = planes.transpose(0, 2, 3, 1).astype(np.float32) / np.float32(255)
    return Dataset(
        images=np.ascontiguousarray(pixels),
        labels=labels,
        n_classes=n_classes,
        name=name,
    )
