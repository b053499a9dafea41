"""Benchmark the compiled random kernels against the pure-Python twins.

Run after an editable install:

    python3 benchmarks/bench_rng.py [--count 200000]

Prints per-operation throughput for both backends and the speedup.  The
two backends produce bit-identical streams; this script also spot-checks
that on a short prefix before timing.
"""

import argparse
import time

import numpy as np

from cas_toolkit import rng


def _check_equivalence(count=2000):
    compiled = rng.kernel_module("compiled").KernelStream(12345)
    pure = rng.kernel_module("python").KernelStream(12345)
    for _ in range(count):
        assert compiled.next_u64() == pure.next_u64()
    compiled = rng.kernel_module("compiled").KernelStream(99)
    pure = rng.kernel_module("python").KernelStream(99)
    a = compiled.betas(0.2, 0.2, count)
    b = pure.betas(0.2, 0.2, count)
    assert a.tobytes() == b.tobytes()


def _time(callable_, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        callable_()
        best = min(best, time.perf_counter() - start)
    return best


def bench(count):
    cum = np.cumsum(np.full(1000, 1.0 / 1000.0))
    cases = [
        ("uniforms", lambda stream: stream.uniforms(count)),
        ("normals", lambda stream: stream.normals(count)),
        ("betas(0.2, 0.2)", lambda stream: stream.betas(0.2, 0.2, count)),
        ("categorical(k=1000)", lambda stream: stream.categorical(cum, count)),
    ]
    header = f"{'operation':<22} {'compiled':>12} {'python':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, op in cases:
        timings = {}
        for backend in ("compiled", "python"):
            stream = rng.kernel_module(backend).KernelStream(7)
            timings[backend] = _time(lambda: op(stream))
        rate_c = count / timings["compiled"]
        rate_p = count / timings["python"]
        print(
            f"{name:<22} {rate_c:>10.0f}/s {rate_p:>10.0f}/s "
            f"{timings['python'] / timings['compiled']:>8.1f}x"
        )


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--count", type=int, default=200000,
                        help="draws per operation (default: 200000)")
    args = parser.parse_args()
    try:
        rng.kernel_module("compiled")
    except ImportError:
        raise SystemExit(
            "compiled kernels are not available; build the extension first "
            "(pip install -e . --no-build-isolation)"
        )
    _check_equivalence()
    print(f"backends bit-identical on a 2000-draw prefix; timing {args.count} draws\n")
    bench(args.count)


if __name__ == "__main__":
    main()
