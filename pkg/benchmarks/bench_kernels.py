"""Compare the compiled kernels with the pure-Python reference.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from ccsim import _pykernels
from ccsim.clustering import draw_random_clustering

try:
    from ccsim import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases():
    rng = np.random.default_rng(0)
    mu = rng.dirichlet(np.ones(2048))
    for n, rho in ((5000, 0.3), (50_000, 0.3)):
        draw = draw_random_clustering("cycle", n, rho, 1)
        ans = draw.clustering.rep_index[draw.clustering.gamma]
        yield f"walk_cells n={n}", "walk_cells", (ans, True, n)
    yield "lambda_scan n=2048", "lambda_scan", (mu, 0.3, 0.13, True)
    yield "window_max n=2048 len=64", "window_max", (mu, 64, True)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'kernel':28s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for label, name, a in cases():
        py = min(timeit.repeat(lambda: getattr(_pykernels, name)(*a), number=1, repeat=args.repeat))
        if _ckernels is None:
            print(f"{label:28s} {py * 1e3:12.2f} {'-':>12s} {'-':>8s}")
            continue
        cy = min(timeit.repeat(lambda: getattr(_ckernels, name)(*a), number=1, repeat=args.repeat))
        print(f"{label:28s} {py * 1e3:12.2f} {cy * 1e3:12.2f} {py / cy:8.1f}")


if __name__ == "__main__":
    main()
