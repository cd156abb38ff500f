"""Seeded random streams.

Every random draw in the package goes through a Philox generator. Philox is
counter based, so a (seed, algorithm) pair pins the stream on every platform
numpy supports. Sub-streams are derived from a master seed by hashing a label.
"""
import hashlib

import numpy as np

RNG_ALGORITHM = "numpy.Philox4x64-10"


def make_rng(seed):
    return np.random.Generator(np.random.Philox(int(seed)))


def derive_seed(seed, *labels):
    """Deterministic 63-bit seed for the sub-stream named by ``labels``."""
    key = repr((int(seed),) + tuple(str(x) for x in labels)).encode()
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1
