"""Compare the compiled and numpy kernel backends on typical problem sizes.

Usage: python benchmarks/bench_kernels.py [--repeat N]
Prints microseconds per call for each kernel and backend, plus the speedup.
"""
import argparse
import timeit

import numpy as np

from twinboot.kernels import get_backend


def cases(k, n, groups):
    rng = np.random.default_rng(0)
    c1, c2 = rng.normal(size=n), rng.normal(size=n)
    group_of = np.repeat(np.arange(groups), n // groups).astype(np.int64)
    sigma_sq = rng.uniform(0.01, 0.1, size=groups)
    two_d = 2.0 * np.bincount(group_of, minlength=groups).astype(np.float64)
    bg1, bg2 = np.random.SFC64(1), np.random.SFC64(2)
    w, g = rng.normal(size=n), rng.normal(size=n)
    m, v = np.zeros(n), np.zeros(n)
    pts = rng.normal(size=(100, 2))
    return {
        f"standard_normal n={n}": lambda: k.standard_normal(bg1, n),
        f"twin_normal_perturb n={n} G={groups}":
            lambda: k.twin_normal_perturb(c1, c2, sigma_sq, group_of, bg1, bg2),
        f"grouped_variance n={n} G={groups}":
            lambda: k.grouped_variance(c1, c2, group_of, two_d),
        f"adam_update n={n}":
            lambda: k.adam_update(w, g, m, v, 1e-3, 0.9, 0.999, 1e-8, 0.5, 0.5),
        "two_well_loss_grad m=100 d=2":
            lambda: k.two_well_loss_grad(np.zeros(2), pts, -np.ones(2), np.ones(2), 0.7),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=2000)
    ap.add_argument("--n", type=int, default=900)
    ap.add_argument("--groups", type=int, default=100)
    args = ap.parse_args()
    try:
        backends = {"cython": get_backend("cython"), "python": get_backend("python")}
    except ImportError:
        print("compiled backend not built; nothing to compare")
        return 1
    timings = {}
    for name, k in backends.items():
        for label, fn in cases(k, args.n, args.groups).items():
            fn()
            t = min(timeit.repeat(fn, number=args.repeat, repeat=3)) / args.repeat
            timings.setdefault(label, {})[name] = t * 1e6
    print(f"{'kernel':<42}{'cython us':>11}{'python us':>11}{'speedup':>9}")
    for label, t in timings.items():
        print(f"{label:<42}{t['cython']:>11.2f}{t['python']:>11.2f}{t['python'] / t['cython']:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
