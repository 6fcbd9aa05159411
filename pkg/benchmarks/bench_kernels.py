"""Compare the numba and numpy flavours of the envelope kernels.

Usage::

    python benchmarks/bench_kernels.py [--sizes 65 257 1025] [--repeat 5]

Each row times one kernel on an ``n x n`` array: the separable sliding
extremum along the last axis and the CSR gather over an l2 disc. Both flavours
are called directly, so the ``ENVKIT_NO_NUMBA`` flag does not matter here.
The first numba call (compilation) is excluded.
"""

import argparse
import timeit

import numpy as np

from envkit import _kernels as K
from envkit._accel import _numba
from envkit.envelopes import neighbour_lists
from envkit.model import AxisGrid, Metric


def _best(fn, repeat):
    fn()  # warm-up / compile
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench(n: int, repeat: int, radius_cells: int = 8):
    rng = np.random.default_rng(n)
    axis = AxisGrid.lin(-1.0, 1.0, n)
    radius = radius_cells * (axis.coords[1] - axis.coords[0])
    a = rng.normal(size=(n, n))
    lo, hi = K.window_bounds_nb(axis.coords, radius)
    rows = []
    rows.append(("sliding", n,
                 _best(lambda: K.sliding_extremum_nb(a, lo, hi, True), repeat),
                 _best(lambda: K.sliding_extremum_np(a, lo, hi, True), repeat)))
    # a 2-D factor with an l2 ball; the other factor is a batch of rows
    m = max(2, int(np.sqrt(n)))
    small = AxisGrid.lin(-1.0, 1.0, m)
    indptr, indices = neighbour_lists((small, small), Metric.L2, 4 * (small.coords[1] - small.coords[0]))
    b = rng.normal(size=(n, m * m))
    rows.append(("gather", n,
                 _best(lambda: K.gather_extremum_nb(b, indptr, indices, True), repeat),
                 _best(lambda: K.gather_extremum_np(b, indptr, indices, True), repeat)))
    return rows


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[65, 257, 1025])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    if _numba is None:
        print("numba is not installed; the *_nb kernels run as plain Python")
    print(f"{'kernel':<10}{'n':>7}{'numba [ms]':>14}{'numpy [ms]':>14}{'ratio':>9}")
    for n in args.sizes:
        for name, size, t_nb, t_np in bench(n, args.repeat):
            print(f"{name:<10}{size:>7}{t_nb * 1e3:>14.3f}{t_np * 1e3:>14.3f}{t_np / t_nb:>9.2f}")


if __name__ == "__main__":
    main()
