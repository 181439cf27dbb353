"""Deterministic counter-based random numbers.

All sampling in this package goes through :class:`Rng` so that a 64-bit seed
fully pins every weight draw, shuffle and augmentation decision, independent
of numpy version or global RNG state.  The generator is SplitMix64 applied to
a counter stream; Gaussians come from the Box-Muller transform.
"""

import zlib

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_NEG53 = 2.0 ** -53


def _mix(z):
    """SplitMix64 finalizer; `z` is a uint64 scalar or array."""
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def mix_seed(*parts):
    """Fold integer or string parts into a single 64-bit seed, order-sensitively."""
    with np.errstate(over="ignore"):
        z = np.uint64(0)
        for p in parts:
            if isinstance(p, str):
                p = zlib.crc32(p.encode())
            z = _mix((z + np.uint64(int(p) & 0xFFFFFFFFFFFFFFFF)) * _GAMMA + _GAMMA)
        return int(z)


class Rng:
    """Stateful view over the SplitMix64 counter stream for one seed."""

    def __init__(self, seed):
        self._seed = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
        self._counter = 0

    def derive(self, *parts):
        """Independent child generator keyed by this seed and `parts`."""
        return Rng(mix_seed(int(self._seed), *parts))

    def _raw(self, n):
        idx = np.arange(self._counter, self._counter + n, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            return _mix(self._seed + (idx + np.uint64(1)) * _GAMMA)

    def uniform(self, n):
        """`n` doubles uniform on [0, 1)."""
        return (self._raw(n) >> np.uint64(11)).astype(np.float64) * _TWO_NEG53

    def normal(self, n):
        """`n` standard normal doubles via Box-Muller."""
        pairs = (n + 1) // 2
        u1 = 1.0 - self.uniform(pairs)  # (0, 1]: safe for log
        u2 = self.uniform(pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def integers(self, n, bound):
        """`n` ints uniform on [0, bound). Rejection-free modulo draw.

        The modulo bias is < bound / 2**64, irrelevant for the small bounds
        (crop offsets, class counts) used here.
        """
        return (self._raw(n) % np.uint64(bound)).astype(np.int64)

    def coin(self, n):
        """`n` booleans with p=0.5."""
        return (self._raw(n) >> np.uint64(63)).astype(bool)

    def permutation(self, n):
        """Fisher-Yates permutation of range(n)."""
        perm = np.arange(n, dtype=np.int64)
        draws = self._raw(n)
        for i in range(n - 1, 0, -1):
            j = int(draws[i] % np.uint64(i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm
