# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled random kernels: xoshiro256** plus derived distributions.

Twin of ``_kernels_py``; see that module for the generator layout.  The
two implementations must stay bit-identical, so every floating point
expression here mirrors the pure-Python version operation for operation
and both call into the same platform libm.
"""

from libc.math cimport cos, log, pow, sqrt
from libc.stdint cimport int64_t, uint64_t

import numpy as np

cdef uint64_t SPLITMIX_GAMMA = 0x9E3779B97F4A7C15ULL
cdef uint64_t MIX_MUL_1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t MIX_MUL_2 = 0x94D049BB133111EBULL

cdef double INV_2_53 = 1.0 / 9007199254740992.0
cdef double TWO_PI = 6.283185307179586

BACKEND = "compiled"


cdef inline uint64_t _rotl(uint64_t x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef class KernelStream:
    """xoshiro256** stream over a 64-bit seed."""

    cdef uint64_t s0, s1, s2, s3

    def __init__(self, seed):
        cdef uint64_t state = <uint64_t> (seed & 0xFFFFFFFFFFFFFFFF)
        cdef uint64_t z
        cdef uint64_t expanded[4]
        cdef int i
        for i in range(4):
            state = state + SPLITMIX_GAMMA
            z = state
            z = (z ^ (z >> 30)) * MIX_MUL_1
            z = (z ^ (z >> 27)) * MIX_MUL_2
            expanded[i] = z ^ (z >> 31)
        self.s0 = expanded[0]
        self.s1 = expanded[1]
        self.s2 = expanded[2]
        self.s3 = expanded[3]

    cdef uint64_t _next(self) nogil:
        cdef uint64_t result = _rotl(self.s1 * 5ULL, 7) * 9ULL
        cdef uint64_t t = self.s1 << 17
        self.s2 ^= self.s0
        self.s3 ^= self.s1
        self.s1 ^= self.s2
        self.s0 ^= self.s3
        self.s2 ^= t
        self.s3 = _rotl(self.s3, 45)
        return result

    cdef double _uniform(self) nogil:
        return <double> (self._next() >> 11) * INV_2_53

    cdef double _uniform_open(self) nogil:
        return <double> ((self._next() >> 11) + 1ULL) * INV_2_53

    cdef double _normal(self) nogil:
        cdef double u1 = self._uniform_open()
        cdef double u2 = self._uniform()
        cdef double r = sqrt(-2.0 * log(u1))
        return r * cos(TWO_PI * u2)

    cdef double _gamma_ge1(self, double shape) nogil:
        cdef double d = shape - 1.0 / 3.0
        cdef double c = 1.0 / sqrt(9.0 * d)
        cdef double x, v, u, xx
        while True:
            x = self._normal()
            v = 1.0 + c * x
            if v <= 0.0:
                continue
            v = v * v * v
            u = self._uniform_open()
            xx = x * x
            if u < 1.0 - 0.0331 * xx * xx:
                return d * v
            if log(u) < 0.5 * xx + d * (1.0 - v + log(v)):
                return d * v

    cdef double _gamma(self, double shape) nogil:
        cdef double g, u
        if shape < 1.0:
            g = self._gamma_ge1(shape + 1.0)
            u = self._uniform_open()
            return g * pow(u, 1.0 / shape)
        return self._gamma_ge1(shape)

    cdef double _beta(self, double a, double b) nogil:
        cdef double x = self._gamma(a)
        cdef double y = self._gamma(b)
        if x == 0.0 and y == 0.0:
            return 0.5
        return x / (x + y)

    def next_u64(self):
        return self._next()

    def uniform(self):
        return self._uniform()

    def uniform_open(self):
        return self._uniform_open()

    def normal(self):
        return self._normal()

    def gamma(self, double shape):
        return self._gamma(shape)

    def beta(self, double a, double b):
        return self._beta(a, b)

    def randbelow(self, bound):
        cdef uint64_t n = <uint64_t> bound
        # rejection below 2^64 mod bound keeps the draw exactly uniform
        cdef uint64_t threshold = (0ULL - n) % n
        cdef uint64_t r
        while True:
            r = self._next()
            if r >= threshold:
                return r % n

    def uniforms(self, Py_ssize_t count):
        out = np.empty(count, dtype=np.float64)
        cdef double[::1] view = out
        cdef Py_ssize_t k
        for k in range(count):
            view[k] = self._uniform()
        return out

    def normals(self, Py_ssize_t count):
        out = np.empty(count, dtype=np.float64)
        cdef double[::1] view = out
        cdef Py_ssize_t k
        for k in range(count):
            view[k] = self._normal()
        return out

    def betas(self, double a, double b, Py_ssize_t count):
        out = np.empty(count, dtype=np.float64)
        cdef double[::1] view = out
        cdef Py_ssize_t k
        for k in range(count):
            view[k] = self._beta(a, b)
        return out

    def categorical(self, cumulative, Py_ssize_t count):
        cum_arr = np.ascontiguousarray(cumulative, dtype=np.float64)
        cdef double[::1] cum = cum_arr
        cdef Py_ssize_t size = cum.shape[0]
        cdef double total = cum[size - 1]
        out = np.empty(count, dtype=np.int64)
        cdef int64_t[::1] view = out
        cdef Py_ssize_t k, lo, hi, mid
        cdef double target
        for k in range(count):
            target = self._uniform() * total
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
            view[k] = lo
        return out
