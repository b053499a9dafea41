"""Deterministic seeded randomness for sampling and augmentation.

The generator is xoshiro256** seeded through splitmix64, with uniforms
taken from the top 53 bits.  Integer and categorical draws are exact bit
streams and therefore portable across machines; ``normal``/``gamma``/
``beta`` route through the platform libm (log, cos, sqrt, pow), so those
streams are reproducible on a given platform but may differ in the last
ulp across C libraries.

Two interchangeable kernel backends exist: a Cython extension and a
pure-Python fallback.  They are written to be bit-identical and the test
suite holds them to that.  Selection happens at import time; set
``CAS_TOOLKIT_NO_EXT=1`` to force the fallback.
"""

import os

from . import _kernels_py
from ._kernels_py import MASK64, mix64

ENV_NO_EXT = "CAS_TOOLKIT_NO_EXT"

if os.environ.get(ENV_NO_EXT, "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py


def backend_name():
    """Name of the active kernel backend: "compiled" or "python"."""
    return _impl.BACKEND


def kernel_module(backend=None):
    """Resolve a kernel module by name; ``None`` means the active one."""
    if backend is None:
        return _impl
    if backend == "python":
        return _kernels_py
    if backend == "compiled":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown rng backend: {backend!r}")


def derive_seed(seed, index):
    """Seed for a derived stream: the base seed XOR the mixed index.

    ``mix64`` is the splitmix64 finalizer, so consecutive indices land on
    unrelated seeds and index 0 does not collide with the base stream.
    """
    if index < 0:
        raise ValueError("stream index must be non-negative")
    return (seed & MASK64) ^ mix64(index)


class SeedStream:
    """A deterministic random stream identified by a 64-bit seed.

    Seeds are taken modulo 2**64.  Two streams built from the same seed
    yield identical draws; use :meth:`spawn` for independent substreams.
    """

    __slots__ = ("seed", "_kernel")

    def __init__(self, seed, backend=None):
        self.seed = int(seed) & MASK64
        self._kernel = kernel_module(backend).KernelStream(self.seed)

    def spawn(self, index, backend=None):
        """Independent stream number ``index`` derived from this seed."""
        return SeedStream(derive_seed(self.seed, index), backend=backend)

    def next_u64(self):
        return self._kernel.next_u64()

    def uniform(self):
        """Uniform double in [0, 1)."""
        return self._kernel.uniform()

    def uniform_open(self):
        """Uniform double in (0, 1]; safe to pass to log."""
        return self._kernel.uniform_open()

    def normal(self):
        """Standard normal deviate (Box-Muller, cosine branch)."""
        return self._kernel.normal()

    def gamma(self, shape):
        """Gamma deviate with the given shape and unit scale."""
        if not shape > 0.0:
            raise ValueError("gamma shape must be positive")
        return self._kernel.gamma(float(shape))

    def beta(self, a, b):
        """Beta(a, b) deviate."""
        if not (a > 0.0 and b > 0.0):
            raise ValueError("beta parameters must be positive")
        return self._kernel.beta(float(a), float(b))

    def randbelow(self, bound):
        """Unbiased integer in [0, bound)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return int(self._kernel.randbelow(int(bound)))

    def uniforms(self, count):
        """float64 array of ``count`` uniform draws."""
        if count < 0:
            raise ValueError("count must be non-negative")
        return self._kernel.uniforms(count)

    def normals(self, count):
        """float64 array of ``count`` normal draws."""
        if count < 0:
            raise ValueError("count must be non-negative")
        return self._kernel.normals(count)

    def betas(self, a, b, count):
        """float64 array of ``count`` Beta(a, b) draws."""
        if not (a > 0.0 and b > 0.0):
            raise ValueError("beta parameters must be positive")
        if count < 0:
            raise ValueError("count must be non-negative")
        return self._kernel.betas(float(a), float(b), count)

    def categorical(self, cumulative, count):
        """int64 array of ``count`` indices drawn from a CDF array.

        ``cumulative`` must be a non-decreasing float64 array whose last
        entry is the total mass (normalization is not required here: each
        uniform is scaled by that total).
        """
        import numpy as np

        cum = np.ascontiguousarray(cumulative, dtype=np.float64)
        if cum.ndim != 1 or cum.shape[0] == 0:
            raise ValueError("cumulative must be a non-empty 1-D array")
        if count < 0:
            raise ValueError("count must be non-negative")
        return self._kernel.categorical(cum, count)

    def shuffle(self, items):
        """In-place Fisher-Yates shuffle of a mutable sequence."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
        return items
