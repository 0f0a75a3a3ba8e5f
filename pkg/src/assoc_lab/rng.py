"""Counter-based seed derivation (SplitMix64 finalizer).

Every draw is a pure function of (seed, structural indices), so ensembles
and trials reproduce identically regardless of generation order or worker
count. Scalar paths use Python ints; bulk paths use wrapping uint64 numpy.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB

_GOLDEN_U64 = np.uint64(GOLDEN)
_MUL1_U64 = np.uint64(_MUL1)
_MUL2_U64 = np.uint64(_MUL2)


def mix64(x: int) -> int:
    """Scramble a 64-bit integer (SplitMix64 output function)."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * _MUL1) & MASK64
    x = ((x ^ (x >> 27)) * _MUL2) & MASK64
    return x ^ (x >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorized mix64 over a uint64 array."""
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= _MUL1_U64
    z ^= z >> np.uint64(27)
    z *= _MUL2_U64
    z ^= z >> np.uint64(31)
    return z


def derive(seed: int, *indices: int) -> int:
    """Derive a child seed from a parent seed and structural indices."""
    s = mix64(seed)
    for k in indices:
        s = mix64((s + (k + 1) * GOLDEN) & MASK64)
    return s


def pattern_keys(seed: int, count: int) -> np.ndarray:
    """uint64 array of derive(seed, 0..count-1), computed in bulk."""
    base = np.uint64(mix64(seed))
    ks = np.arange(1, count + 1, dtype=np.uint64)
    return mix64_array(base + ks * _GOLDEN_U64)


def stream_u64(keys, counters) -> np.ndarray:
    """Counter-keyed 64-bit draws; broadcasts keys against counters."""
    k = np.asarray(keys, dtype=np.uint64)
    c = np.asarray(counters, dtype=np.uint64)
    return mix64_array(k + (c + np.uint64(1)) * _GOLDEN_U64)


def stream_unit(keys, counters) -> np.ndarray:
    """Uniform [0, 1) float64 draws with 53-bit resolution."""
    return (stream_u64(keys, counters) >> np.uint64(11)).astype(np.float64) * 2.0**-53
