"""splitmix64 stream with fixed derivations for uniforms and normals.

Every random quantity in the package is drawn from this generator so that
fixtures are bit-identical across platforms:

* uniform reals take the top 53 bits of each output, ``(x >> 11) * 2**-53``;
* normals use Box-Muller on consecutive uniform pairs ``(u1, u2)``, emitting
  ``r*cos(2*pi*u2)`` then ``r*sin(2*pi*u2)`` with ``r = sqrt(-2 log(1 - u1))``.
"""
from __future__ import annotations

import hashlib

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MASK = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def mix64(x: int) -> int:
    """The splitmix64 finalizer applied to a single integer."""
    with np.errstate(over="ignore"):
        return int(_mix(np.array([x & _MASK], dtype=np.uint64))[0])


def derive_seed(seed: int, tag: str) -> int:
    """Domain-separated child seed: the tag is hashed and mixed into ``seed``."""
    h = int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=8).digest(), "little")
    return mix64((seed & _MASK) ^ h)


class SplitMix64:
    """Sequential splitmix64 generator.

    The state advances by the golden-ratio increment once per 64-bit output;
    batches are computed vectorized but are identical to drawing one by one.
    """

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next_u64(self, n: int) -> np.ndarray:
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self.state) + steps * GAMMA
            out = _mix(states)
        self.state = (self.state + n * int(GAMMA)) & _MASK
        return out

    def uniform(self, n: int) -> np.ndarray:
        """n uniforms in [0, 1)."""
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, n: int) -> np.ndarray:
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        z = np.empty((pairs, 2))
        z[:, 0] = r * np.cos(theta)
        z[:, 1] = r * np.sin(theta)
        return z.reshape(-1)[:n]

    def integers(self, n: int, bound: int) -> np.ndarray:
        """n integers uniform in [0, bound) via floor(u * bound)."""
        return np.floor(self.uniform(n) * bound).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of range(n)."""
        perm = np.arange(n)
        if n < 2:
            return perm
        js = self.uniform(n - 1)
        for i in range(n - 1, 0, -1):
            j = int(js[n - 1 - i] * (i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm
