"""Pure-Python random kernels: xoshiro256** plus derived distributions.

This module is the fallback twin of the compiled ``_kernels`` extension.
Both implementations must produce bit-identical streams: every floating
point operation here is written in the same order and with the same
constants as the C version, and both route transcendental calls through
the platform libm.  Integer state is kept in Python ints masked to 64
bits, mirroring native uint64 wraparound.

Generator layout:

* seeding: four rounds of splitmix64 expand a 64-bit seed into the
  xoshiro256** state (an all-zero state is unreachable this way)
* ``uniform``      -> (next_u64 >> 11) * 2^-53, in [0, 1)
* ``uniform_open`` -> ((next_u64 >> 11) + 1) * 2^-53, in (0, 1]
* ``normal``       -> Box-Muller, cosine branch only (one deviate per
  pair of uniforms; the sine branch is discarded for stream clarity)
* ``gamma``        -> Marsaglia-Tsang squeeze; shapes below 1 use the
  boost G(a) = G(a+1) * U^(1/a)
* ``beta``         -> ratio of two gammas, with a 0/0 guard
* ``randbelow``    -> unbiased bounded integer by rejection
* ``categorical``  -> inverse-CDF lookup, upper-bound binary search
"""

import math

import numpy as np

MASK64 = (1 << 64) - 1

_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_MIX_MUL_1 = 0xBF58476D1CE4E5B9
_MIX_MUL_2 = 0x94D049BB133111EB

# 2^-53; exact in binary64, so the scaling below is a pure exponent shift
_INV_2_53 = 1.0 / 9007199254740992.0
_TWO_PI = 6.283185307179586

BACKEND = "python"


def mix64(value):
    """The splitmix64 finalizer as a pure function (used to derive seeds)."""
    z = (value + _SPLITMIX_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * _MIX_MUL_1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX_MUL_2) & MASK64
    return z ^ (z >> 31)


class KernelStream:
    """xoshiro256** stream over a 64-bit seed."""

    __slots__ = ("_s0", "_s1", "_s2", "_s3")

    def __init__(self, seed):
        state = seed & MASK64
        expanded = []
        for _ in range(4):
            state = (state + _SPLITMIX_GAMMA) & MASK64
            z = state
            z = ((z ^ (z >> 30)) * _MIX_MUL_1) & MASK64
            z = ((z ^ (z >> 27)) * _MIX_MUL_2) & MASK64
            expanded.append(z ^ (z >> 31))
        self._s0, self._s1, self._s2, self._s3 = expanded

    def next_u64(self):
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        x = (s1 * 5) & MASK64
        result = (((x << 7) | (x >> 57)) & MASK64) * 9 & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & MASK64
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return result

    def uniform(self):
        return (self.next_u64() >> 11) * _INV_2_53

    def uniform_open(self):
        return ((self.next_u64() >> 11) + 1) * _INV_2_53

    def normal(self):
        u1 = self.uniform_open()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        return r * math.cos(_TWO_PI * u2)

    def gamma(self, shape):
        if shape < 1.0:
            g = self._gamma_ge1(shape + 1.0)
            u = self.uniform_open()
            return g * math.pow(u, 1.0 / shape)
        return self._gamma_ge1(shape)

    def _gamma_ge1(self, shape):
        d = shape - 1.0 / 3.0
        c = 1.0 / math.sqrt(9.0 * d)
        while True:
            x = self.normal()
            v = 1.0 + c * x
            if v <= 0.0:
                continue
            v = v * v * v
            u = self.uniform_open()
            xx = x * x
            if u < 1.0 - 0.0331 * xx * xx:
                return d * v
            if math.log(u) < 0.5 * xx + d * (1.0 - v + math.log(v)):
                return d * v

    def beta(self, a, b):
        x = self.gamma(a)
        y = self.gamma(b)
        if x == 0.0 and y == 0.0:
            return 0.5
        return x / (x + y)

    def randbelow(self, bound):
        # rejection below 2^64 mod bound keeps the draw exactly uniform
        threshold = (1 << 64) % bound
        while True:
            r = self.next_u64()
            if r >= threshold:
                return r % bound

    def uniforms(self, count):
        out = np.empty(count, dtype=np.float64)
        for k in range(count):
            out[k] = (self.next_u64() >> 11) * _INV_2_53
        return out

    def normals(self, count):
        out = np.empty(count, dtype=np.float64)
        for k in range(count):
            out[k] = self.normal()
        return out

    def betas(self, a, b, count):
        out = np.empty(count, dtype=np.float64)
        for k in range(count):
            out[k] = self.beta(a, b)
        return out

    def categorical(self, cumulative, count):
        """Draw ``count`` indices from the CDF ``cumulative`` (float64).

        Each uniform is scaled by the total mass and located with an
        upper-bound binary search, then clamped to the last index so a
        draw of exactly the total cannot fall off the end.
        """
        cum = np.ascontiguousarray(cumulative, dtype=np.float64)
        size = cum.shape[0]
        total = cum[size - 1]
        out = np.empty(count, dtype=np.int64)
        for k in range(count):
            target = ((self.next_u64() >> 11) * _INV_2_53) * total
            lo = 0
            hi = size
            while lo < hi:
                mid = (lo + hi) >> 1
                if cum[mid] <= target:
                    lo = mid + 1
                else:
                    hi = mid
            if lo >= size:
                lo = size - 1
            out[k] = lo
        return out
