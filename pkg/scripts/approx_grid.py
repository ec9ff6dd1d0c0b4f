"""Approximation ratio over a grid of (n, d, eps), with an optional wall-clock budget.

Writes one CSV row per solved instance and a per-cell summary to stderr.
"""

import argparse
import csv
import sys
import time

from geomatch.cli import generate
from geomatch.conditioner import solve
from geomatch.hierarchy import ConstantsConfig
from geomatch.oracle import hungarian


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="8,16,32")
    ap.add_argument("--dims", default="2,3")
    ap.add_argument("--eps", default="0.5,0.25,0.1")
    ap.add_argument("--instances", type=int, default=10)
    ap.add_argument("--mode", choices=("theory", "practical"), default="theory")
    ap.add_argument("--budget", type=float, default=600.0, help="seconds; stops starting new instances after this")
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    cfg = ConstantsConfig.for_mode(args.mode)
    sizes = [int(x) for x in args.sizes.split(",")]
    dims = [int(x) for x in args.dims.split(",")]
    epss = [float(x) for x in args.eps.split(",")]
    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["n", "d", "eps", "seed", "seconds", "ratio", "ok"])
    start = time.perf_counter()
    for n in sizes:
        for d in dims:
            for eps in epss:
                worst, count = 1.0, 0
                for seed in range(args.instances):
                    if time.perf_counter() - start > args.budget:
                        break
                    inst = generate(n, d, "uniform", 1000 * seed + n)
                    t0 = time.perf_counter()
                    r = solve(inst, eps, cfg)
                    dt = time.perf_counter() - t0
                    opt = hungarian(inst.points_a, inst.points_b).cost
                    ratio = r.cost / opt if opt > 0 else 1.0
                    worst, count = max(worst, ratio), count + 1
                    w.writerow([n, d, eps, seed, f"{dt:.3f}", repr(ratio), int(ratio <= 1 + eps + 1e-12)])
                    out.flush()
                print(f"n={n} d={d} eps={eps}: {count} instances, worst ratio {worst:.6f}", file=sys.stderr)


if __name__ == "__main__":
    main()
