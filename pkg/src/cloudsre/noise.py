"""
Seedable, splittable streams of standard-normal variates.

Generator
---------
Every stream is a NumPy ``Philox`` (Philox4x64-10, counter based) bit
generator keyed by ``SeedSequence(seed, spawn_key=key)``.  A top-level stream
has ``key == ()``; ``substream(i)`` appends ``i`` to the key, so a substream is
a pure function of ``(seed, key)`` and does not depend on how many draws the
parent has made.

Normal variates come from ``numpy.random.Generator.standard_normal``, the
256-layer Ziggurat of NumPy >= 1.17.  Batch draws and repeated scalar draws
produce the same sequence bit for bit, so vectorized and scalar code paths
consuming the same stream stay in lockstep.

A stream is single-owner.  Hand out substreams to parallel workers instead of
sharing one stream.
"""

import numpy as np

from .errors import DomainError

__all__ = ["NoiseStream", "FixedNoise", "new_stream", "next_gaussian", "substream"]

_U64 = 2**64


def _check_u64(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise DomainError(f"{name} must be an integer, got {type(value).__name__}")
    if not 0 <= int(value) < _U64:
        raise DomainError(f"{name} must be in [0, 2**64), got {value}")
    return int(value)


class NoiseStream:
    """Deterministic stream of i.i.d. N(0, 1) draws.

    Parameters
    ----------
    seed : int
        Unsigned 64-bit seed.
    key : tuple of int, optional
        Substream path below the root stream.

    Attributes
    ----------
    position : int
        Number of draws consumed so far.
    """

    def __init__(self, seed=0, key=()):
        self.seed = _check_u64(seed, "seed")
        self.key = tuple(_check_u64(k, "substream index") for k in key)
        self.position = 0
        self._gen = self._make_generator()

    def _make_generator(self):
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"NoiseStream(seed={self.seed}, key={self.key}, position={self.position})"

    def next_gaussian(self):
        self.position += 1
        return float(self._gen.standard_normal())

    def normals(self, n):
        """Draw ``n`` variates at once; same values as ``n`` scalar draws."""
        n = int(n)
        if n < 0:
            raise DomainError("n must be nonnegative")
        self.position += n
        return self._gen.standard_normal(n)

    def substream(self, index):
        """Independent child stream, deterministic in ``(seed, key, index)``."""
        return NoiseStream(self.seed, self.key + (index,))

    def replay(self, position):
        """Return the draw this stream produces at ``position`` (0-based).

        Replays from a fresh copy; the stream itself is not advanced.
        """
        if position < 0:
            raise DomainError("position must be nonnegative")
        gen = self._make_generator()
        if position:
            gen.standard_normal(position)
        return float(gen.standard_normal())


class FixedNoise:
    """Stream stand-in that serves a fixed list of draws.

    Useful for injecting known ``eps`` values.  Raises ``IndexError`` once the
    list is exhausted.
    """

    def __init__(self, values):
        self._values = np.asarray(values, dtype=float).ravel()
        self.position = 0

    def next_gaussian(self):
        v = self._values[self.position]
        self.position += 1
        return float(v)

    def normals(self, n):
        n = int(n)
        if self.position + n > self._values.size:
            raise IndexError("FixedNoise exhausted")
        out = self._values[self.position : self.position + n].copy()
        self.position += n
        return out


def new_stream(seed=0):
    return NoiseStream(seed)


def next_gaussian(stream):
    return stream.next_gaussian()


def substream(stream, index):
    return stream.substream(index)
