"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 1000x50,10000x100] [--repeat 20]

Also runs one full alternating-minimisation solve per backend.  The first numba
call (compilation or cache load) is excluded from the kernel timings.
"""
import argparse
import time

import numpy as np

from robust_phase import _kernels
from robust_phase.altmin import AltMinConfig, run_altmin
from robust_phase.datagen import (CorruptionPlan, RngSeed, apply_corruption, generate_clean,
                                  random_unit_vector)


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(m, d, repeat):
    gen = np.random.default_rng(0)
    X = gen.standard_normal((m, d))
    theta = gen.standard_normal(d)
    y = (X @ gen.standard_normal(d)) ** 2
    v = gen.standard_normal(d)
    rows = []
    for name in ("loss", "loss_grad", "sample_residuals", "hess_qform"):
        args = (X, y, theta, v) if name == "hess_qform" else (X, y, theta)
        times = {}
        for b in ("numpy", "numba"):
            be = _kernels.get_backend(b)
            fn = getattr(be, name)
            fn(*args)  # warm-up / compile
            times[be.name] = _best(lambda: fn(*args), repeat)
        rows.append((name, times))
    return rows


def bench_solve(d, repeat):
    n = int(np.ceil(10 * d * np.log(d)))
    k = int(np.ceil(np.sqrt(n)))
    seed = RngSeed(0)
    ts = random_unit_vector(d, seed.child(0))
    data = apply_corruption(generate_clean(d, n, ts, seed.child(1)),
                            CorruptionPlan.uniform(-5, 5, k), seed.child(2))
    out = {}
    saved = _kernels.backend
    try:
        for b in ("numpy", "numba"):
            _kernels.backend = _kernels.get_backend(b)
            run_altmin(data, AltMinConfig(k=k), 0)
            out[_kernels.backend.name] = _best(lambda: run_altmin(data, AltMinConfig(k=k), 0),
                                               max(1, repeat // 5))
    finally:
        _kernels.backend = saved
    return n, k, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1000x20,10000x50,100000x50")
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--solve-d", type=int, default=50)
    args = ap.parse_args(argv)

    print(f"{'kernel':<18}{'m':>8}{'d':>5}{'numpy ms':>11}{'numba ms':>11}{'speedup':>9}")
    for size in args.sizes.split(","):
        m, d = (int(t) for t in size.split("x"))
        for name, t in bench_kernels(m, d, args.repeat):
            a = t.get("numpy", float("nan"))
            b = t.get("numba", float("nan"))
            print(f"{name:<18}{m:>8}{d:>5}{a * 1e3:>11.3f}{b * 1e3:>11.3f}{a / b:>9.2f}")
    n, k, t = bench_solve(args.solve_d, args.repeat)
    a = t.get("numpy", float("nan"))
    b = t.get("numba", float("nan"))
    print(f"\nfull solve d={args.solve_d} n={n} k={k}: numpy {a * 1e3:.1f} ms, "
          f"numba {b * 1e3:.1f} ms, speedup {a / b:.2f}")


if __name__ == "__main__":
    main()
