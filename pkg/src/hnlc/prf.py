"""Counter-based pseudorandom function (SplitMix64-style mixing).

Every stochastic-looking quantity in the toolkit (synthetic logits, drift
noise) is a pure function of (seed, counters...) built on this mixer, so
any value can be regenerated on any machine without carrying RNG state.

Mixing constants are the SplitMix64 finalizer constants:
    increment  0x9E3779B97F4A7C15
    multiplier 0xBF58476D1CE4E5B9
    multiplier 0x94D049BB133111EB
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MULT1 = 0xBF58476D1CE4E5B9
_MULT2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """SplitMix64 finalizer over a 64-bit integer."""
    z = (x + _GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * _MULT1) & MASK64
    z = ((z ^ (z >> 27)) * _MULT2) & MASK64
    return z ^ (z >> 31)


def prf(seed: int, *counters: int) -> int:
    """64-bit PRF of a seed and any number of counters.

    Counters are folded in one at a time; prf(s, a, b) != prf(s, b, a)
    in general.
    """
    h = mix64(seed & MASK64)
    for c in counters:
        h = mix64(h ^ mix64(c & MASK64))
    return h


_INDEX_MIX_CACHE: dict[int, np.ndarray] = {}


def prf_array(seed: int, counter: int, n: int) -> np.ndarray:
    """Vectorized prf(seed, counter, i) for i in range(n), as uint64."""
    h = np.uint64(prf(seed, counter))
    # inline mix64 over the index, then fold into h and mix again; the
    # index mix is independent of seed/counter so it is computed once per n
    z = _INDEX_MIX_CACHE.get(n)
    if z is None:
        z = _mix64_vec(np.arange(n, dtype=np.uint64))
        z.flags.writeable = False
        _INDEX_MIX_CACHE[n] = z
    return _mix64_vec(h ^ z)


_U_GAMMA = np.uint64(_GAMMA)
_U_MULT1 = np.uint64(_MULT1)
_U_MULT2 = np.uint64(_MULT2)
_U30, _U27, _U31 = np.uint64(30), np.uint64(27), np.uint64(31)


def _mix64_vec(x: np.ndarray) -> np.ndarray:
    # identical arithmetic to mix64, with in-place ops on two buffers to
    # keep temporary allocations off the per-symbol hot path
    z = x + _U_GAMMA
    t = z >> _U30
    z ^= t
    z *= _U_MULT1
    np.right_shift(z, _U27, out=t)
    z ^= t
    z *= _U_MULT2
    np.right_shift(z, _U31, out=t)
    return z ^ t


_U11 = np.uint64(11)


def uniform01(words: np.ndarray) -> np.ndarray:
    """Map uint64 PRF words to float64 uniform values in [0, 1)."""
    u = (words >> _U11).astype(np.float64)
    u *= 2.0 ** -53
    return u
