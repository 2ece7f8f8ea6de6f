"""
Random streams keyed by (root seed, purpose tag, iteration, sample index).

Every stochastic decision in a run draws from its own Philox4x64 stream
(numpy's counter-based `Philox` bit generator). The root seed and a hash of
the purpose tag form the 128 bit key. Iteration and sample index occupy the
two high words of the 256 bit counter and draws advance the low words. Two
streams never overlap, and the result of a per-sample computation does not
depend on the order in which samples are processed.
"""
import hashlib

import numpy as np

MASK64 = 2**64 - 1


def purpose_key(purpose: str) -> int:
    digest = hashlib.blake2b(purpose.encode('utf-8'), digest_size=8).digest()
    return int.from_bytes(digest, 'little', signed=False)


def stream(
    root_seed: int,
    purpose: str,
    iteration: int = 0,
    index: int = 0,
) -> np.random.Generator:
    assert 0 <= iteration and 0 <= index, (iteration, index)
    key = ((root_seed & MASK64) << 64) | purpose_key(purpose)
    counter = np.array(
        [0, 0, index & MASK64, iteration & MASK64],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key, counter=counter))
