"""Seedable random streams.

Every stochastic component draws from an :class:`RngStream`, identified by a
``(seed, stream_id)`` pair and backed by the counter-based Philox generator.
Gaussian variates come from the Box-Muller transform so that the number of
uniforms consumed per variate is fixed; this keeps streams aligned between
runs regardless of which code path consumed them.
"""
from __future__ import annotations

import hashlib

import numpy as np

from .errors import InvalidParameter

DEFAULT_SEED = 42
_MASK64 = (1 << 64) - 1


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & _MASK64
    # str hash() is salted per process; blake2b is stable
    return int.from_bytes(hashlib.blake2b(str(key).encode("utf-8"), digest_size=8).digest(), "little")


def derive_stream_id(stream_id: int, *keys) -> int:
    """Deterministically combine a stream id with extra keys into a new 64-bit id."""
    entropy = [int(stream_id) & _MASK64] + [_key_to_int(k) for k in keys]
    state = np.random.SeedSequence(entropy).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


class RngStream:
    """A reproducible random stream owned by one execution context.

    Parameters
    ----------
    seed : int
        Master seed (64-bit unsigned).
    stream_id : int
        Substream selector. Distinct ids give independent sequences.
    """

    def __init__(self, seed: int = DEFAULT_SEED, stream_id: int = 0):
        seed = int(seed)
        stream_id = int(stream_id)
        if not (0 <= seed <= _MASK64) or not (0 <= stream_id <= _MASK64):
            raise InvalidParameter("seed and stream_id must be 64-bit unsigned integers", module="core_rng")
        self.seed = seed
        self.stream_id = stream_id
        ss = np.random.SeedSequence(entropy=[seed & 0xFFFFFFFF, seed >> 32,
                                             stream_id & 0xFFFFFFFF, stream_id >> 32])
        self._gen = np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def spawn(self, *keys) -> "RngStream":
        """Fresh stream for a sub-task, e.g. ``stream.spawn("realization", 17)``."""
        return RngStream(self.seed, derive_stream_id(self.stream_id, *keys))

    # -- draws -------------------------------------------------------------
    def uniform(self, size=None):
        """Uniform variate(s) in [0, 1)."""
        return self._gen.random(size)

    def standard_normal(self, size=None):
        """Standard normal variate(s) by Box-Muller.

        A scalar draw consumes two uniforms; an array of ``n`` values consumes
        ``2*ceil(n/2)`` uniforms.
        """
        if size is None:
            u1, u2 = self._gen.random(2)
            return float(np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2))
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape, dtype=np.int64))
        m = (n + 1) // 2
        u = self._gen.random((2, m))
        r = np.sqrt(-2.0 * np.log1p(-u[0]))
        theta = 2.0 * np.pi * u[1]
        z = np.empty(2 * m)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return z[:n].reshape(shape)

    def normal(self, mean=0.0, std=1.0, size=None):
        std_arr = np.asarray(std, dtype=float)
        if np.any(std_arr < 0) or np.any(np.isnan(std_arr)):
            raise InvalidParameter(f"normal: std must be >= 0, got {std}", module="core_rng")
        if size is None and np.ndim(mean) == 0 and np.ndim(std) == 0:
            z = self.standard_normal()
            return float(mean) if std == 0 else float(mean + std * z)
        if size is None:
            size = np.broadcast(np.asarray(mean), std_arr).shape
        return mean + std_arr * self.standard_normal(size)

    def uniform_unit_vector(self, d: int, size=None):
        """Isotropic unit vector(s) in ``d`` dimensions; ``d=1`` returns +-1."""
        if d not in (1, 2, 3):
            raise InvalidParameter(f"dimension must be 1, 2 or 3, got {d}", module="core_rng")
        n = 1 if size is None else int(size)
        if d == 1:
            v = np.where(self._gen.random(n) < 0.5, -1.0, 1.0)[:, None]
        elif d == 2:
            theta = 2.0 * np.pi * self._gen.random(n)
            v = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        else:
            # Archimedes: z uniform on [-1, 1] and azimuth uniform
            u = self._gen.random((2, n))
            z = 2.0 * u[0] - 1.0
            rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
            phi = 2.0 * np.pi * u[1]
            v = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
        return v[0] if size is None else v


def as_stream(rng=None, seed: int | None = None) -> RngStream:
    """Accept an existing stream, an int seed, or ``None`` (default seed)."""
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        return RngStream(DEFAULT_SEED if seed is None else seed, 0)
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng), 0)
    raise TypeError(f"cannot build an RngStream from {type(rng).__name__}")


# functional spellings
def uniform(stream: RngStream, size=None):
    return stream.uniform(size)


def normal(stream: RngStream, mean=0.0, std=1.0, size=None):
    return stream.normal(mean, std, size)


def uniform_unit_vector(stream: RngStream, d: int, size=None):
    return stream.uniform_unit_vector(d, size)
