"""Seeded splitmix64 generator and random band-limited test data.

Every random draw in the package goes through :class:`SplitMix64` so that
fixed seeds reproduce outputs bit for bit. The stream is the reference
splitmix64 sequence: ``state += 0x9E3779B97F4A7C15`` then the
``(30, 27, 31)`` xor-shift/multiply finalizer. Doubles take the top 53 bits.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


class SplitMix64:
    """Vectorised splitmix64 stream."""

    def __init__(self, seed: int = 0):
        self.state = np.uint64(int(seed) % (1 << 64))

    def next_u64(self, size: int = 1) -> np.ndarray:
        with np.errstate(over="ignore"):
            steps = np.arange(1, size + 1, dtype=np.uint64) * _GAMMA
            z = self.state + steps
            self.state = z[-1] if size else self.state
            z = (z ^ (z >> np.uint64(30))) * _M1
            z = (z ^ (z >> np.uint64(27))) * _M2
            return z ^ (z >> np.uint64(31))

    def uniform(self, low=0.0, high=1.0, size=None):
        k = 1 if size is None else int(np.prod(size))
        v = (self.next_u64(k) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        v = low + (high - low) * v
        return float(v[0]) if size is None else v.reshape(size)

    def normal(self, size=None):
        """Standard normals by Box-Muller."""
        k = 1 if size is None else int(np.prod(size))
        m = (k + 1) // 2
        u1 = 1.0 - self.uniform(size=m)  # in (0, 1]
        u2 = self.uniform(size=m)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])[:k]
        return float(z[0]) if size is None else z.reshape(size)

    def integers(self, low, high, size=None):
        k = 1 if size is None else int(np.prod(size))
        span = np.uint64(high - low)
        v = (self.next_u64(k) % span).astype(np.int64) + low
        return int(v[0]) if size is None else v.reshape(size)

    def spawn(self, key: int) -> "SplitMix64":
        """Independent child stream, e.g. one per worker."""
        child = SplitMix64(0)
        child.state = np.uint64(int(self.next_u64(1)[0]) ^ (int(key) * 0xD1B54A32D192ED03 % (1 << 64)))
        return child


def _trig(x, coeffs):
    out = np.zeros_like(x)
    for k, (a, b) in enumerate(coeffs, start=1):
        out += a * np.cos(2 * np.pi * k * x) + b * np.sin(2 * np.pi * k * x)
    return out


def random_tangent(rng: SplitMix64, n: int, modes: int = 4, scale: float = 1.0) -> np.ndarray:
    """Zero-mean trigonometric polynomial with decaying random coefficients."""
    x = np.arange(n) / n
    c = rng.normal(size=(modes, 2)) / np.arange(1, modes + 1)[:, None]
    return scale * _trig(x, c)


def random_density(rng: SplitMix64, n: int, modes: int = 4, amp: float = 0.5) -> np.ndarray:
    """Unit-mass positive trigonometric polynomial with ``min >= 1 - amp``."""
    v = random_tangent(rng, n, modes)
    top = np.max(np.abs(v))
    if top > 0:
        v = v * (amp * rng.uniform(0.2, 1.0) / top)
    return 1.0 + v
