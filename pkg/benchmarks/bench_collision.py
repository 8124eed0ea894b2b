"""Compiled vs numpy hard-sphere kernel timings.

    python3 benchmarks/bench_collision.py [--per-axis 8 12] [--repeat 3]
"""
import argparse
import timeit

import numpy as np

from boltzlim import collision
from boltzlim.collision import angular_quadrature, collide_hard_sphere
from boltzlim.grid import build_velocity_grid, maxwellian_values


def sample(grid, seed=0):
    rng = np.random.default_rng(seed)
    M = maxwellian_values(1.0, np.array([0.3, -0.2, 0.1]), 1.1, grid.nodes)
    return M * (1 + 0.2 * rng.uniform(-1, 1, grid.size))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--per-axis", type=int, nargs="+", default=[8, 12])
    ap.add_argument("--angles", type=int, nargs=2, default=[4, 4])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    angles = angular_quadrature(*args.angles)
    print(f"default backend: {collision.BACKEND}")
    print(f"{'per_axis':>8} {'compiled s':>11} {'numpy s':>10} {'speedup':>8} {'max diff':>10}")
    for n in args.per_axis:
        grid = build_velocity_grid(6.0, n)
        F = sample(grid)
        runs = {}
        for b in ("compiled", "numpy"):
            if b == "compiled" and collision.BACKEND != "compiled":
                continue
            fn = lambda b=b: collide_hard_sphere(F, grid, angles, backend=None if b == "compiled" else "numpy")
            runs[b] = (min(timeit.repeat(fn, number=1, repeat=args.repeat)), fn().values)
        tc = runs.get("compiled", (float("nan"), None))
        tn = runs["numpy"]
        diff = float(np.abs(tc[1] - tn[1]).max()) if tc[1] is not None else float("nan")
        print(f"{n:>8} {tc[0]:>11.4f} {tn[0]:>10.4f} {tn[0] / tc[0]:>8.1f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
