"""Compare the compiled and pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--sizes 64 128 256 512] [--reps 5]

Prints one CSV row per (kernel, size): median seconds for each backend and
the speed-up. Both backends are checked for identical output first.
"""
from __future__ import annotations

import argparse
import statistics
import sys
import time

import numpy as np

from stopline import _pykernels

try:
    from stopline import _ckernels
except ImportError:
    _ckernels = None


def _median(fn, reps):
    ts = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return statistics.median(ts)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256, 512])
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--density", type=float, default=0.02)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; reinstall with Cython available", file=sys.stderr)
        return 1
    rng = np.random.default_rng(args.seed)
    kernels = {
        "nearest_site": lambda mod, m: mod.nearest_site(m),
        "clipped_distance": lambda mod, m: mod.clipped_distance(m, 12),
        "label8": lambda mod, m: mod.label8(m),
    }
    print("kernel,size,cython_s,python_s,speedup")
    for n in args.sizes:
        m = (rng.random((n, n)) < args.density).astype(np.uint8)
        for name, call in kernels.items():
            a, b = call(_ckernels, m), call(_pykernels, m)
            for x, y in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
                if not np.array_equal(x, y):
                    print(f"{name} backends disagree at {n}x{n}", file=sys.stderr)
                    return 1
            tc = _median(lambda: call(_ckernels, m), args.reps)
            tp = _median(lambda: call(_pykernels, m), args.reps)
            print(f"{name},{n},{tc:.6f},{tp:.6f},{tp / tc:.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
