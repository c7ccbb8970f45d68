"""Time the numba kernels against their numpy twins.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 3] [--k 10000] [--N 1000000]

Each kernel is run once to trigger compilation, then timed ``--repeat``
times per backend; the best time is reported.
"""

import argparse
import time

import numpy as np

from openulam import IntervalSet, OpenSystem, Partition, kernels
from openulam._jit import HAVE_NUMBA
from openulam.holes import lorenz_system
from openulam.maps import beta_shift
from openulam.oracle import uniform_points
from openulam.spectral import leading_triple
from openulam.ulam import build_open


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(k, N):
    beta = OpenSystem(beta_shift(5.9), IntervalSet([(0.9001, 1.0)]))
    lorenz = lorenz_system(2.01, 0.8)
    part = Partition.uniform((0, 1), k)
    P = build_open(beta, part, backend="numpy")
    x_beta = uniform_points(beta.x0, N, seed=1)
    x_lor = uniform_points(lorenz.x0, N, seed=1)
    return {
        f"build_open beta k={k}": lambda b: build_open(beta, part, backend=b),
        f"build_open lorenz k={k}": lambda b: build_open(lorenz, Partition.uniform(lorenz.domain, k), backend=b),
        f"power_iterate beta k={k}": lambda b: leading_triple(P, 1e-12, backend=b),
        f"simulate beta N={N}": lambda b: kernels.simulate_orbits(beta.map, beta.hole, x_beta, 200, backend=b),
        f"simulate lorenz N={N}": lambda b: kernels.simulate_orbits(lorenz.map, lorenz.hole, x_lor, 200, backend=b),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--k", type=int, default=10_000)
    ap.add_argument("--N", type=int, default=1_000_000)
    args = ap.parse_args(argv)
    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    print(f"{'kernel':34s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, fn in cases(args.k, args.N).items():
        t = [best_of(lambda: fn(b), args.repeat) for b in backends]
        row = f"{name:34s}" + "".join(f"{v:11.4f}s" for v in t)
        if len(t) > 1:
            row += f"{t[0] / t[1]:11.1f}x"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
