"""Wall time and total path+cycle edges against n, with a fit of edges ~ C n log^2 n / eps^2."""

import argparse
import math
import time

import numpy as np

from geomatch.cli import generate
from geomatch.conditioner import solve
from geomatch.hierarchy import ConstantsConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="8,16,32,64")
    ap.add_argument("--trials", type=int, default=3)
    ap.add_argument("--eps", type=float, default=0.25)
    ap.add_argument("--mode", choices=("theory", "practical"), default="practical")
    args = ap.parse_args()

    cfg = ConstantsConfig.for_mode(args.mode)
    sizes = [int(x) for x in args.sizes.split(",")]
    times, edges = [], []
    for n in sizes:
        ts, es = [], []
        for trial in range(args.trials):
            inst = generate(n, 2, "uniform", 50_000 + trial)
            t0 = time.perf_counter()
            r = solve(inst, args.eps, cfg)
            ts.append(time.perf_counter() - t0)
            es.append(r.path_edges + r.cycle_edges)
        times.append(np.mean(ts))
        edges.append(np.mean(es))
        print(f"n={n:6d}  time {times[-1]:9.3f}s  edges {edges[-1]:10.1f}", flush=True)
    for k in range(1, len(sizes)):
        print(f"time ratio n={sizes[k - 1]}->{sizes[k]}: {times[k] / times[k - 1]:.2f}")
    x = np.array([n * math.log2(n) ** 2 / args.eps**2 for n in sizes])
    y = np.array(edges)
    c = float(x @ y / (x @ x))
    print(f"fitted C = {c:.5g}; relative residuals {np.round((y - c * x) / (c * x), 3).tolist()}")


if __name__ == "__main__":
    main()
