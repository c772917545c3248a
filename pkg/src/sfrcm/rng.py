"""Counter-based randomness: Philox4x32-10 keyed by a 64-bit seed.

Every random quantity is a pure function of (seed, stream, counter words), so
results never depend on iteration order or on how work is split between
threads.
"""
from __future__ import annotations

import math

import numba as nb
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_U32 = np.uint64(32)

# stream tags occupy the third counter word
STREAM_COUNT = 1
STREAM_POSITION = 2
STREAM_WEIGHT = 3
STREAM_EDGE = 4
STREAM_SEED = 5

MASK64 = (1 << 64) - 1


@nb.njit(inline="always", cache=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (p1 >> _U32) ^ c1 ^ k0, p1 & _MASK, (p0 >> _U32) ^ c3 ^ k1, p0 & _MASK
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


@nb.njit(inline="always", cache=True)
def to_unit(a, b):
    """53-bit uniform in [0, 1) from two 32-bit words."""
    return ((a >> np.uint64(5)) * np.uint64(67108864) + (b >> np.uint64(6))) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True)
def uniform_at(k0, k1, c0, c1, stream):
    a, b, _, _ = philox4x32(np.uint64(c0), np.uint64(c1), np.uint64(stream), np.uint64(0), k0, k1)
    return to_unit(a, b)


@nb.njit(cache=True)
def _uniform_block(k0, k1, n, c1, stream):
    out = np.empty(n)
    s = np.uint64(stream)
    z = np.uint64(0)
    cc = np.uint64(c1)
    for i in range(n):
        a, b, _, _ = philox4x32(np.uint64(i), cc, s, z, k0, k1)
        out[i] = to_unit(a, b)
    return out


def split_key(seed: int):
    seed = int(seed) & MASK64
    return np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32)


def uniforms(seed: int, n: int, stream: int, lane: int = 0) -> np.ndarray:
    """Uniforms in [0, 1) at counters (0..n-1, lane, stream)."""
    k0, k1 = split_key(seed)
    return _uniform_block(k0, k1, int(n), int(lane), int(stream))


def hash64(master_seed: int, a: int, b: int) -> int:
    """Derive an independent 64-bit seed from a master seed and two indices."""
    k0, k1 = split_key(master_seed)
    w = philox4x32(np.uint64(a), np.uint64(b), np.uint64(STREAM_SEED), np.uint64(0), k0, k1)
    return (int(w[0]) << 32) | int(w[1])


class UniformStream:
    """Sequential view over one counter lane; used by rejection samplers."""

    def __init__(self, seed: int, stream: int, lane: int = 0):
        self._k = split_key(seed)
        self._stream = stream
        self._lane = lane
        self.position = 0

    def __call__(self) -> float:
        u = uniform_at(self._k[0], self._k[1], self.position, self._lane, self._stream)
        self.position += 1
        return u


def poisson(lam: float, next_uniform) -> int:
    """Exact Poisson(lam) variate driven by a uniform source.

    Inversion by sequential search for lam < 30; Hormann's transformed
    rejection with squeeze (PTRS) for lam >= 30.
    """
    if lam < 0 or not math.isfinite(lam):
        raise ValueError(f"Poisson mean must be finite and >= 0, got {lam}")
    if lam == 0:
        return 0
    if lam < 30:
        u = next_uniform()
        k = 0
        p = math.exp(-lam)
        cdf = p
        while u > cdf:
            k += 1
            p *= lam / k
            cdf += p
            if p == 0.0:  # u landed in rounding slack above the summed cdf
                break
        return k
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2)
    while True:
        u = next_uniform() - 0.5
        v = next_uniform()
        us = 0.5 - abs(u)
        if us == 0.0:
            continue
        k = math.floor((2 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= v_r:
            return int(k)
        if k < 0 or (us < 0.013 and v > us):
            continue
        if v == 0.0:
            continue
        if (math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b)
                <= -lam + k * loglam - math.lgamma(k + 1)):
            return int(k)
