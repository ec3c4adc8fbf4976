"""Empirical CA-CFAR false-alarm rate on noise-only GLRT maps at several design points."""

import argparse
import json

from otfs_lab.experiments import calibrate_cfar


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--params", default="isi-regime")
    ap.add_argument("--points", type=float, nargs="+", default=[0.5, 1e-2, 1e-3, 1e-4])
    ap.add_argument("--cells-factor", type=float, default=1000.0, help="cells per point = factor / p_fa")
    ap.add_argument("--min-cells", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for p_fa in args.points:
        n = max(args.min_cells, int(args.cells_factor / p_fa))
        rep = calibrate_cfar(args.params, p_fa, n, seed=args.seed)
        rep["ratio"] = rep["empirical_rate"] / p_fa
        print(json.dumps(rep))


if __name__ == "__main__":
    main()
