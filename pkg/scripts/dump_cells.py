"""Print the compressed graphs of every cell after initialization, for eyeballing or golden files."""

import argparse

from geomatch.cli import generate
from geomatch.conditioner import beta_range, coarse_estimate, condition
from geomatch.hierarchy import ConstantsConfig, cover_height, derive_params
from geomatch.matcher import Matcher


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=6)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--eps", type=float, default=0.5)
    ap.add_argument("--beta-index", type=int, default=0, help="which guess 2^i * w0 to condition at")
    ap.add_argument("--mode", choices=("theory", "practical"), default="practical")
    args = ap.parse_args()

    inst = generate(args.n, 2, "uniform", args.seed)
    w0 = coarse_estimate(inst).w0
    assert args.beta_index in beta_range(args.n)
    ci = condition(inst, args.eps, w0 * 2.0**args.beta_index)
    cfg = ConstantsConfig.for_mode(args.mode)
    params = derive_params(cfg, 2, ci.n, args.eps, "l2", cover_height(ci.points_a + ci.points_b, 2))
    m = Matcher(ci.points_a, ci.points_b, params, cfg)
    m.initialize()
    for cid in sorted(m.graphs):
        print(m.graphs[cid].dump())


if __name__ == "__main__":
    main()
