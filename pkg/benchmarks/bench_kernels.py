"""Compare the numba and numpy kernel backends on deployment-sized inputs.

    python benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

For each kernel the script checks that both backends return identical
results, then prints the best-of-N wall time of each and the speedup.  The
numba timings exclude JIT compilation (one warm-up call per kernel).
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from multirat import _kernels

HALF_WIDTH = 1800.0


def _points(gen, n):
    return gen.uniform(-HALF_WIDTH, HALF_WIDTH, n), gen.uniform(-HALF_WIDTH, HALF_WIDTH, n)


def _cases(scale: float, seed: int = 7):
    gen = np.random.default_rng(seed)
    n_ap = int(2000 * scale)
    n_user = int(60000 * scale)
    ax, ay = _points(gen, n_ap)
    ux, uy = _points(gen, n_user)
    w = np.exp(gen.normal(0.0, 0.4, n_ap)) * gen.choice([40.0, 1.0, 0.5, 0.2], n_ap)
    scale_ap = w ** -0.25
    n_c = int(1500 * scale)
    cx, cy = _points(gen, n_c)
    backoff = gen.uniform(0.0, 2.0, n_c)
    radius = np.full(n_c, 30.0)
    return {
        "weighted_nearest": lambda: _kernels.weighted_nearest(ux, uy, ax, ay, scale_ap, HALF_WIDTH),
        "sensing_winners": lambda: _kernels.sensing_winners(cx, cy, backoff, radius, HALF_WIDTH),
        "count_pairs": lambda: _kernels.count_pairs(cx, cy, 15.0, HALF_WIDTH),
        "weighted_nearest(torus)": lambda: _kernels.weighted_nearest(ux, uy, ax, ay, scale_ap, HALF_WIDTH,
                                                                     2 * HALF_WIDTH),
    }


def _best(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return bool(np.array_equal(np.asarray(a), np.asarray(b)))


def run(repeat: int = 5, scale: float = 1.0) -> list[dict]:
    previous = _kernels.backend()
    rows = []
    try:
        for name, fn in _cases(scale).items():
            _kernels.set_backend("numba")
            fn()  # compile
            t_nb, r_nb = _best(fn, repeat)
            _kernels.set_backend("numpy")
            t_np, r_np = _best(fn, max(1, repeat // 2))
            rows.append({"kernel": name, "numba_s": t_nb, "numpy_s": t_np,
                         "speedup": t_np / t_nb if t_nb > 0 else float("inf"), "identical": _same(r_nb, r_np)})
    finally:
        _kernels.set_backend(previous)
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0, help="multiply point counts")
    args = ap.parse_args()
    print(f"{'kernel':26s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}  identical")
    for r in run(args.repeat, args.scale):
        print(f"{r['kernel']:26s} {1e3 * r['numba_s']:11.2f} {1e3 * r['numpy_s']:11.2f} "
              f"{r['speedup']:8.1f}  {r['identical']}")


if __name__ == "__main__":
    main()
