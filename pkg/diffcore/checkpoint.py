"""
RMM1 checkpoint files.

Layout (little-endian): magic b"RMM1", u32 tensor count, then per tensor a
u16 name length, the UTF-8 name, u8 rank, one u64 per extent and the raw
f32 payload.

Values that need more than f32 precision (threshold statistics, iteration
counters) are stored bit-cast into f32 lanes under names ending in `.f64`
or `.u64`; they are copied as bytes and never computed on while encoded.
"""
import struct
from collections import OrderedDict

import numpy as np

MAGIC = b'RMM1'


class CheckpointError(ValueError):
    pass


def pack_f64(values) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(values, dtype='<f8').reshape(-1)).view('<f4')


def unpack_f64(lanes: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(lanes, dtype='<f4').view('<f8').astype(np.float64)


def pack_u64(value: int) -> np.ndarray:
    return np.array([value], dtype='<u8').view('<f4')


def unpack_u64(lanes: np.ndarray) -> int:
    return int(np.ascontiguousarray(lanes, dtype='<f4').view('<u8')[0])


def dumps(tensors: 'OrderedDict[str, np.ndarray]') -> bytes:
    chunks = [MAGIC, struct.pack('<I', len(tensors))]
    for name, value in tensors.items():
        encoded = name.encode('utf-8')
        array = np.asarray(value)
        if array.dtype != np.dtype('<f4'):
            array = array.astype('<f4')
        chunks.append(struct.pack('<H', len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack('<B', array.ndim))
        chunks.append(struct.pack(f'<{array.ndim}Q', *array.shape))
        chunks.append(np.ascontiguousarray(array).tobytes())
    return b''.join(chunks)


def loads(blob: bytes) -> 'OrderedDict[str, np.ndarray]':
    if blob[:4] != MAGIC:
        raise CheckpointError(f"Bad checkpoint magic: {blob[:4]!r}")
    offset = 4

    def take(n: int) -> bytes:
        nonlocal offset
        if offset + n > len(blob):
            raise CheckpointError("Truncated checkpoint")
        chunk = blob[offset:offset + n]
        offset += n
        return chunk

    (count,) = struct.unpack('<I', take(4))
    tensors: 'OrderedDict[str, np.ndarray]' = OrderedDict()
    for _ in range(count):
        (name_len,) = struct.unpack('<H', take(2))
        name = take(name_len).decode('utf-8')
        (rank,) = struct.unpack('<B', take(1))
        shape = struct.unpack(f'<{rank}Q', take(8 * rank))
        size = int(np.prod(shape, dtype=np.int64)) if rank else 1
        payload = np.frombuffer(take(4 * size), dtype='<f4').reshape(shape).copy()
        if name in tensors:
            raise CheckpointError(f"Duplicate tensor name: {name}")
        tensors[name] = payload
    if offset != len(blob):
        raise CheckpointError(f"{len(blob) - offset} trailing bytes in checkpoint")
    return tensors


def save(path: str, tensors: 'OrderedDict[str, np.ndarray]') -> None:
    with open(path, 'wb') as fp:
        fp.write(dumps(tensors))


def load(path: str) -> 'OrderedDict[str, np.ndarray]':
    with open(path, 'rb') as fp:
        return loads(fp.read())
