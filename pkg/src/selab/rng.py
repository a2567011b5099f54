"""Counter-based deterministic randomness.

Every random quantity in the package is a pure function of a 64-bit seed and
an integer counter (or a lattice site), computed with a splitmix64-style bit
mixer.  That makes replicate streams splittable without coordination and lets
site-keyed values be evaluated lazily, in any order, on scalars or numpy
arrays.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_U_GAMMA = np.uint64(_GAMMA)
_U_M1 = np.uint64(_M1)
_U_M2 = np.uint64(_M2)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)

_INV53 = float(2.0**-53)


def mix64(z: int) -> int:
    """Finalizing 64-bit mixer (splitmix64 output function)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorized :func:`mix64` on a uint64 array."""
    z = (z ^ (z >> _U30)) * _U_M1
    z = (z ^ (z >> _U27)) * _U_M2
    return z ^ (z >> _U31)


def derive(seed: int, *parts: int | str) -> int:
    """Derive a child seed from a parent seed and a label path.

    Parts may be small strings (stream names) or integers (replicate
    indices); the result is a pure function of the arguments.
    """
    h = mix64((seed ^ _GAMMA) & MASK64)
    for p in parts:
        if isinstance(p, str):
            for b in p.encode():
                h = mix64(h ^ b)
        else:
            h = mix64((h ^ p) & MASK64)
    return h


def uniform_at(seed: int, index: int) -> float:
    """The index-th uniform in [0, 1) of the stream keyed by ``seed``."""
    h = mix64((seed + (index + 1) * _GAMMA) & MASK64)
    return (h >> 11) * _INV53


def uniforms(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """Vector of uniforms ``[uniform_at(seed, offset + i) for i < count]``."""
    idx = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    h = mix64_array(np.uint64(seed & MASK64) + idx * _U_GAMMA)
    return (h >> _U11).astype(np.float64) * _INV53


def hash_sites(seed: int, coords: np.ndarray) -> np.ndarray:
    """Hash an (n, d) int64 coordinate array to uint64, keyed by seed.

    Pure in (seed, coordinates): the same site always hashes to the same
    word no matter how or when it is visited.
    """
    coords = np.ascontiguousarray(coords, dtype=np.int64)
    if coords.ndim == 1:
        coords = coords[:, None]
    h = np.full(coords.shape[0], mix64(seed ^ _GAMMA), dtype=np.uint64)
    for j in range(coords.shape[1]):
        c = coords[:, j].view(np.uint64)
        h = mix64_array(h ^ mix64_array(c + np.uint64((j + 1) * _GAMMA & MASK64)))
    return mix64_array(h)


def site_uniforms(seed: int, coords: np.ndarray) -> np.ndarray:
    """Uniforms in [0, 1), one per site, keyed purely by (seed, site)."""
    return (hash_sites(seed, coords) >> _U11).astype(np.float64) * _INV53
