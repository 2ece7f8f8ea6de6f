import struct

import numpy as np
import pytest

from dataset.core import FormatError
from dataset.formats import (
    CIFAR_RECORD,
    IDX_IMAGES_MAGIC,
    IDX_LABELS_MAGIC,
    load_cifar_batches,
    load_cifar_binary,
    load_idx,
    parse_idx,
)


def idx_blob(magic: int, array: np.ndarray) -> bytes:
    header = struct.pack('>I', magic) + struct.pack(f'>{array.ndim}I', *array.shape)
    return header + array.astype(np.uint8).tobytes()


@pytest.fixture
def mnist_like(tmp_path):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, size=(3, 8, 8), dtype=np.uint8)
    labels = np.array([7, 0, 9], np.uint8)
    images_path = tmp_path / 'images-idx3-ubyte'
    labels_path = tmp_path / 'labels-idx1-ubyte'
    images_path.write_bytes(idx_blob(IDX_IMAGES_MAGIC, images))
    labels_path.write_bytes(idx_blob(IDX_LABELS_MAGIC, labels))
    return images, labels, str(images_path), str(labels_path)


class TestIdx:

    def test_load(self, mnist_like):
        images, labels, images_path, labels_path = mnist_like
        ds = load_idx(images_path, labels_path, n_classes=10)
        assert ds.images.shape == (3, 8, 8, 1)
        assert ds.images.dtype == np.float32
        np.testing.assert_array_equal(ds.labels, labels)
        np.testing.assert_array_equal(ds.images[..., 0], images.astype(np.float32) / np.float32(255))

    def test_pixels_round_trip(self, mnist_like):
        images, labels, images_path, labels_path = mnist_like
        ds = load_idx(images_path, labels_path)
        restored = np.rint(ds.images[..., 0] * 255).astype(np.uint8)
        assert idx_blob(IDX_IMAGES_MAGIC, restored) == idx_blob(IDX_IMAGES_MAGIC, images)
        assert ds.n_classes == 10

    def test_parse(self):
        array = np.arange(24, dtype=np.uint8).reshape(2, 3, 4)
        np.testing.assert_array_equal(parse_idx(idx_blob(0x0803, array)), array)

    def test_wrong_magic(self, mnist_like):
        _, labels, _, _ = mnist_like
        with pytest.raises(FormatError):
            parse_idx(idx_blob(IDX_LABELS_MAGIC, labels), IDX_IMAGES_MAGIC)
        with pytest.raises(FormatError):
            parse_idx(b'\x00\x00\x0d\x01' + b'\x00' * 8)

    def test_truncated(self):
        blob = idx_blob(IDX_LABELS_MAGIC, np.arange(10, dtype=np.uint8))
        with pytest.raises(FormatError):
            parse_idx(blob[:-1])
        with pytest.raises(FormatError):
            parse_idx(blob[:6])

    def test_trailing_bytes_are_ignored(self):
        array = np.arange(5, dtype=np.uint8)
        parsed = parse_idx(idx_blob(IDX_LABELS_MAGIC, array) + b'\xff\xff')
        np.testing.assert_array_equal(parsed, array)

    def test_count_mismatch(self, mnist_like, tmp_path):
        _, _, images_path, _ = mnist_like
        labels_path = tmp_path / 'short-labels'
        labels_path.write_bytes(idx_blob(IDX_LABELS_MAGIC, np.array([1, 2], np.uint8)))
        with pytest.raises(FormatError):
            load_idx(images_path, str(labels_path))


def cifar_records(labels, rng):
    planes = rng.integers(0, 256, size=(len(labels), 3, 32, 32), dtype=np.uint8)
    blob = b''.join(
        bytes([label]) + planes[k].tobytes() for k, label in enumerate(labels)
    )
    return planes, blob


class TestCifar:

    def test_load(self, tmp_path):
        planes, blob = cifar_records([3, 8], np.random.default_rng(1))
        path = tmp_path / 'data_batch_1.bin'
        path.write_bytes(blob)
        ds = load_cifar_binary(str(path))
        assert len(blob) == 2 * CIFAR_RECORD
        assert ds.images.shape == (2, 32, 32, 3)
        np.testing.assert_array_equal(ds.labels, [3, 8])
        # Pixel (y, x) of channel c comes from plane c.
        assert ds.images[1, 5, 7, 2] == np.float32(planes[1, 2, 5, 7]) / np.float32(255)
        restored = np.rint(ds.images * 255).astype(np.uint8).transpose(0, 3, 1, 2)
        np.testing.assert_array_equal(restored, planes)

    def test_batches_concatenate(self, tmp_path):
        rng = np.random.default_rng(2)
        paths = []
        for k, labels in enumerate(([1], [2, 3])):
            _, blob = cifar_records(labels, rng)
            path = tmp_path / f'data_batch_{k + 1}.bin'
            path.write_bytes(blob)
            paths.append(str(path))
        ds = load_cifar_batches(paths)
        np.testing.assert_array_equal(ds.labels, [1, 2, 3])

    def test_partial_record(self, tmp_path):
        _, blob = cifar_records([0], np.random.default_rng(3))
        path = tmp_path / 'broken.bin'
        path.write_bytes(blob[:-1])
        with pytest.raises(FormatError):
            load_cifar_binary(str(path))
