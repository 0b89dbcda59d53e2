"""Counter-based deterministic random number streams.

Every draw is a pure function of ``(seed, stream_id, counter)``: streams are
immutable, never advance hidden state, and can be replayed or sharded across
workers without coordination. The 64-bit mixer is the splitmix64 finalizer;
the word at counter ``c`` is ``mix64(key + (c + 1) * GOLDEN)`` where ``key``
folds the seed and stream id together. Gaussian variates come from Box-Muller
applied to 53-bit uniforms, two words per variate, so the i-th Gaussian of a
stream always consumes counters ``2i`` and ``2i + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB
_SEED_SALT = 0x243F6A8885A308D3
_STREAM_SALT = 0x452821E638D01377

_TWO_NEG53 = 2.0**-53


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit integer (scalar path)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX_A) & _MASK
    z = ((z ^ (z >> 27)) * _MIX_B) & _MASK
    return z ^ (z >> 31)


def _mix64_arr(z: np.ndarray) -> np.ndarray:
    # uint64 arithmetic wraps silently on arrays, which is exactly what we want
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_A)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_B)
    return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class RngStream:
    """An immutable handle into the (seed, stream_id, counter) keyspace.

    ``counter`` is the base offset of this stream's counter space; draw
    methods take a local ``start`` relative to it and never mutate the
    stream. Use :meth:`derive` to obtain statistically independent child
    streams (per image, per Monte Carlo sample, per patch, ...).
    """

    seed: int
    stream_id: int
    counter: int = 0

    def _key(self) -> int:
        return mix64(mix64(self.seed ^ _SEED_SALT) ^ mix64(self.stream_id ^ _STREAM_SALT))

    def derive(self, child: int) -> "RngStream":
        """Child stream number ``child``; children of distinct parents and
        distinct indices are independent for all practical purposes."""
        cid = mix64((self.stream_id + _GOLDEN * (child + 1)) & _MASK)
        return RngStream(self.seed, cid, 0)

    def raw(self, n: int, start: int = 0) -> np.ndarray:
        """``n`` raw 64-bit words at counters ``start .. start + n - 1``."""
        counters = np.arange(self.counter + start, self.counter + start + n, dtype=np.uint64)
        words = (counters + np.uint64(1)) * np.uint64(_GOLDEN) + np.uint64(self._key())
        return _mix64_arr(words)

    def uniforms(self, n: int, start: int = 0) -> np.ndarray:
        """``n`` float64 uniforms in [0, 1) with 53-bit resolution."""
        return (self.raw(n, start) >> np.uint64(11)).astype(np.float64) * _TWO_NEG53

    def normals(self, n: int, start: int = 0) -> np.ndarray:
        """``n`` standard Gaussians via Box-Muller, 2 words per variate."""
        w = self.raw(2 * n, start)
        u1 = ((w[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO_NEG53  # (0, 1]
        u2 = (w[1::2] >> np.uint64(11)).astype(np.float64) * _TWO_NEG53
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def randint(self, bound: int, start: int = 0) -> int:
        """One integer uniform on ``[0, bound)``, consuming one counter."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return min(int(self.uniforms(1, start)[0] * bound), bound - 1)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of ``range(n)``, counters ``0 .. n - 2``."""
        idx = np.arange(n)
        u = self.uniforms(max(n - 1, 0))
        for k, i in enumerate(range(n - 1, 0, -1)):
            j = min(int(u[k] * (i + 1)), i)
            idx[i], idx[j] = idx[j], idx[i]
        return idx
