"""64-bit mixing used for seed derivation, sketch item hashing and feature hashing.

Everything here is built on the SplitMix64 finalizer, which is a bijection on
64-bit words. Scalar helpers work on Python ints, the ``*_array`` variants on
``uint64`` numpy arrays (numpy wraps on overflow for unsigned arrays).
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_GAMMA_U = np.uint64(GOLDEN_GAMMA)
_M1_U = np.uint64(_M1)
_M2_U = np.uint64(_M2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> _S30)) * _M1_U
    z = (z ^ (z >> _S27)) * _M2_U
    return z ^ (z >> _S31)


def derive_column_seed(master_seed: int, column_index: int, stage_tag: int) -> int:
    """Seed for one (column, stage) pair, independent of evaluation order."""
    h = mix64((master_seed & MASK64) + GOLDEN_GAMMA)
    h = mix64(h ^ ((column_index * GOLDEN_GAMMA + 1) & MASK64))
    h = mix64(h ^ ((stage_tag * _M1 + 0x632BE59BD9B4E019) & MASK64))
    return h


def _hash_keys(hash_seed: int) -> tuple[int, int]:
    k1 = mix64(hash_seed + GOLDEN_GAMMA)
    return k1, mix64(k1 + GOLDEN_GAMMA)


def item_hash(value: int, hash_seed: int = 0) -> int:
    """Hash a signed 64-bit integer to a uniformly mixed 64-bit word.

    Two rounds of the SplitMix64 finalizer keyed by ``hash_seed``. For a fixed
    seed the map is a bijection, so distinct inputs never collide.
    """
    k1, k2 = _hash_keys(hash_seed)
    return mix64(mix64((value & MASK64) + k1) ^ k2)


def item_hash_array(values: np.ndarray, hash_seed: int = 0) -> np.ndarray:
    k1, k2 = _hash_keys(hash_seed)
    v = np.asarray(values, dtype=np.int64).view(np.uint64)
    with np.errstate(over="ignore"):
        return mix64_array(mix64_array(v + np.uint64(k1)) ^ np.uint64(k2))
