"""Timing comparison of the numpy and numba kernel backends.

Runs each hot kernel over both registered implementations at a few
problem sizes and reports per-call microseconds.  The numba column is
only present when the JIT backend imported cleanly and was not disabled
via MODELGRAD_DISABLE_NUMBA.

Usage: python3 benchmarks/bench_kernels.py [--sizes 10000,100000] [--m 10]
"""

import argparse
import time

import numpy as np

from modelgrad.kernels import IMPLEMENTATIONS, NUMBA_ENABLED


def _time_call(fn, args, repeats):
    fn(*args)  # warmup (JIT compile / cache touch)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best * 1e6


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="10000,100000",
                        help="comma list of dimensions n")
    parser.add_argument("--m", type=int, default=10, help="number of centers")
    parser.add_argument("--repeats", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    rng = np.random.default_rng(args.seed)
    backends = list(IMPLEMENTATIONS)
    print(f"backends: {', '.join(backends)} (numba enabled: {NUMBA_ENABLED})")
    header = f"{'kernel':<18}{'n':>9}" + "".join(f"{b + ' us':>14}" for b in backends)
    print(header)
    print("-" * len(header))

    for n in sizes:
        centers = np.ascontiguousarray(rng.standard_normal((args.m, n)))
        x = rng.standard_normal(n)
        cases = (
            ("ballsum_value", (centers, x, 1.0)),
            ("ballsum_subgrad", (centers, x, 1.0)),
            ("minmax_value", (centers, x)),
        )
        for name, call_args in cases:
            cells = []
            for b in backends:
                us = _time_call(IMPLEMENTATIONS[b][name], call_args, args.repeats)
                cells.append(f"{us:>14.1f}")
            print(f"{name:<18}{n:>9}" + "".join(cells))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
