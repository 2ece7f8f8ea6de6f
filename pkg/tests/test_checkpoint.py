import struct
from collections import OrderedDict

import numpy as np
import pytest

from diffcore import checkpoint
from diffcore.checkpoint import CheckpointError


@pytest.fixture
def tensors():
    rng = np.random.default_rng(0)
    return OrderedDict([
        ('conv.weight', rng.standard_normal((2, 3, 3, 3)).astype(np.float32)),
        ('bias', np.array([1.5, -0.25], np.float32)),
        ('scalar', np.array(3.0, np.float32)),
        ('tau.f64', checkpoint.pack_f64([1.0 / 3.0])),
    ])


class TestCodec:

    def test_round_trip(self, tensors):
        loaded = checkpoint.loads(checkpoint.dumps(tensors))
        assert list(loaded) == list(tensors)
        for name, value in tensors.items():
            assert loaded[name].shape == value.shape
            np.testing.assert_array_equal(loaded[name], value)

    def test_reserialisation_is_byte_identical(self, tensors):
        blob = checkpoint.dumps(tensors)
        assert checkpoint.dumps(checkpoint.loads(blob)) == blob

    def test_header(self, tensors):
        blob = checkpoint.dumps(tensors)
        assert blob[:4] == b'RMM1'
        assert struct.unpack('<I', blob[4:8]) == (4,)
        (name_len,) = struct.unpack('<H', blob[8:10])
        assert blob[10:10 + name_len] == b'conv.weight'

    def test_bad_magic(self, tensors):
        blob = checkpoint.dumps(tensors)
        with pytest.raises(CheckpointError):
            checkpoint.loads(b'XXXX' + blob[4:])

    def test_truncated(self, tensors):
        blob = checkpoint.dumps(tensors)
        with pytest.raises(CheckpointError):
            checkpoint.loads(blob[:-3])

    def test_trailing_bytes(self, tensors):
        with pytest.raises(CheckpointError):
            checkpoint.loads(checkpoint.dumps(tensors) + b'\0')

    def test_duplicate_names(self):
        one = checkpoint.dumps(OrderedDict([('a', np.zeros(1, np.float32))]))
        blob = one[:4] + struct.pack('<I', 2) + one[8:] + one[8:]
        with pytest.raises(CheckpointError):
            checkpoint.loads(blob)

    def test_file_round_trip(self, tensors, tmp_path):
        path = str(tmp_path / 'x.rmm')
        checkpoint.save(path, tensors)
        assert checkpoint.dumps(checkpoint.load(path)) == checkpoint.dumps(tensors)


class TestBitCasting:

    def test_f64_is_exact(self):
        values = np.array([0.1, 1.0 / 3.0, 0.999999999999, -1e-300])
        lanes = checkpoint.pack_f64(values)
        assert lanes.dtype == np.dtype('<f4') and lanes.shape == (8,)
        np.testing.assert_array_equal(checkpoint.unpack_f64(lanes), values)

    def test_f64_survives_the_file_format(self):
        blob = checkpoint.dumps(OrderedDict([('x.f64', checkpoint.pack_f64([0.1]))]))
        assert checkpoint.unpack_f64(checkpoint.loads(blob)['x.f64'])[0] == 0.1

    @pytest.mark.parametrize('value', [0, 7, 2**40 + 3, 2**64 - 1])
    def test_u64(self, value):
        blob = checkpoint.dumps(OrderedDict([('n.u64', checkpoint.pack_u64(value))]))
        assert checkpoint.unpack_u64(checkpoint.loads(blob)['n.u64']) == value
