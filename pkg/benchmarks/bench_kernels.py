#!/usr/bin/env python3
"""Timing comparison between the compiled simulation kernel and the
pure-numpy fallback, on the two hot workloads:

* fused walk + local-time histogram streaming (checkpointed), and
* first-return detection (escape-probability estimation).

Both backends consume identical Philox streams, so before timing each
workload the script asserts the outputs are exactly equal.

Usage: python benchmarks/bench_kernels.py [--replicas R] [--steps N]
"""

import argparse
import time
from fractions import Fraction

import numpy as np

from ltwalk import kernel, walks


def time_backend(fn, backend, replicas):
    t0 = time.perf_counter()
    out = [fn(r, backend) for r in range(replicas)]
    return time.perf_counter() - t0, out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--replicas", type=int, default=20)
    ap.add_argument("--steps", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    if "compiled" not in kernel.available_backends():
        raise SystemExit("compiled kernel not built; nothing to compare")

    biased = walks.preset("biased1d", p=Fraction(2, 3))
    simple3 = walks.preset("simple", d=3)
    tb = walks.build_tables(biased)
    t3 = walks.build_tables(simple3)
    checkpoints = [args.steps // 8, args.steps // 2, args.steps]

    def local_times(r, backend):
        return kernel.simulate_local_times(biased, tb, args.seed, r,
                                           checkpoints, backend=backend)

    def first_return(r, backend):
        return kernel.first_return_time(simple3, t3, args.seed, r,
                                        args.steps // 10, backend=backend)

    rows = []
    for name, fn, reps in [("local-times", local_times, args.replicas),
                           ("first-return", first_return, args.replicas * 20)]:
        t_pure, out_pure = time_backend(fn, "pure", reps)
        t_comp, out_comp = time_backend(fn, "compiled", reps)
        if name == "local-times":
            for a_row, b_row in zip(out_comp, out_pure):
                for a, b in zip(a_row, b_row):
                    assert a.range == b.range and np.array_equal(a.qs, b.qs)
        else:
            assert out_comp == out_pure
        rows.append((name, reps, t_pure, t_comp, t_pure / t_comp))

    print(f"{'workload':<14}{'calls':>7}{'pure [s]':>10}{'compiled [s]':>14}{'speedup':>9}")
    for name, reps, tp, tc, s in rows:
        print(f"{name:<14}{reps:>7}{tp:>10.3f}{tc:>14.3f}{s:>8.1f}x")
    print("\noutputs identical across backends: yes")


if __name__ == "__main__":
    main()
