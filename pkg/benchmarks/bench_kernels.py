"""Time the hot kernels on every importable backend.

Usage: python3 benchmarks/bench_kernels.py [--size 64] [--repeats 5] [--half 2]
"""

import argparse
import time

import numpy as np

from bogatse.kernels import get_backends


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=64, help="cubic grid size")
    ap.add_argument("--repeats", type=int, default=5, help="repeats, best time kept")
    ap.add_argument("--half", type=int, default=2, help="box half-width for box_sum_3d")
    args = ap.parse_args()

    n = args.size
    rng = np.random.default_rng(0)
    real = rng.standard_normal((n, n, n))

    def cplx():
        return rng.standard_normal((n, n, n)) + 1j * rng.standard_normal((n, n, n))

    s1, s2, s3, s4 = cplx(), cplx(), cplx(), cplx()
    floor = 1e-6 * float(np.median(np.abs(s3) ** 2 + np.abs(s4) ** 2))

    backends = get_backends()
    cases = {
        "box_sum_3d": lambda mod: mod.box_sum_3d(real, args.half),
        "ratio_combine": lambda mod: mod.ratio_combine(s1, s2, s3, s4, floor),
        "verbatim_combine": lambda mod: mod.verbatim_combine(s1, s2, s3, s4, floor),
    }

    print(f"grid {n}^3, best of {args.repeats}")
    header = f"{'kernel':<18}" + "".join(f"{b:>14}" for b in backends)
    if len(backends) > 1:
        header += f"{'speedup':>10}"
    print(header)
    for name, call in cases.items():
        times = {b: best_of(lambda m=mod: call(m), args.repeats) for b, mod in backends.items()}
        row = f"{name:<18}" + "".join(f"{times[b] * 1e3:>12.2f}ms" for b in backends)
        if "python" in times and "compiled" in times:
            row += f"{times['python'] / times['compiled']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
