"""Counter-based random streams shared by every sampler in the package.

Randomness is produced by hashing (seed, n, k, slot) tuples with the
splitmix64 finalizer instead of advancing a stateful generator.  Each shot
owns fixed counter coordinates, so a dataset is a pure function of its seed:
the same bytes come out no matter how the work is scheduled or which kernel
backend runs it.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / float(1 << 53)

_FNV_OFFSET = np.uint64(0xCBF29CE484222325)
_FNV_PRIME = np.uint64(0x100000001B3)


def mix64(z):
    """splitmix64 finalizer; accepts uint64 scalars or arrays."""
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _MIX1
        z = (z ^ (z >> _S27)) * _MIX2
        return z ^ (z >> _S31)


def _as_u64(w) -> np.uint64:
    if isinstance(w, str):
        h = _FNV_OFFSET
        with np.errstate(over="ignore"):
            for b in w.encode("utf-8"):
                h = (h ^ np.uint64(b)) * _FNV_PRIME
        return h
    w = int(w)
    if w < 0:
        raise ValueError("stream words must be nonnegative integers")
    return np.uint64(w % (1 << 64))


def derive(seed, *words) -> int:
    """Derive a named substream seed by absorbing words into splitmix64.

    Words may be nonnegative ints or short strings (hashed with FNV-1a).
    """
    with np.errstate(over="ignore"):
        h = mix64(_as_u64(seed) + GOLDEN)
        for w in words:
            h = mix64(h + GOLDEN + _as_u64(w))
    return int(h)


def uniforms(seed, a, b, c) -> np.ndarray:
    """Uniform [0, 1) doubles indexed by counters (a, b, c).

    Any of a, b, c may be a uint64 array; the others broadcast.  The numba
    kernels reimplement the same arithmetic bit for bit.
    """
    with np.errstate(over="ignore"):
        h = mix64(np.uint64(seed) + GOLDEN)
        h = mix64(h + GOLDEN + np.asarray(a, dtype=np.uint64))
        h = mix64(h + GOLDEN + np.asarray(b, dtype=np.uint64))
        h = mix64(h + GOLDEN + np.asarray(c, dtype=np.uint64))
    return (h >> _S11) * _INV53
