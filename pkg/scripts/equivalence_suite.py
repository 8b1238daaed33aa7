"""Run the five-notion agreement suite on the model spaces and tabulate it."""

import argparse
import csv
import time

from lapbounds.notions import NOTIONS
from lapbounds.space import build_model_space
from lapbounds.suites import equivalence_suite

SPACES = {"euclidean_grid": 51, "sphere2": 64, "hyperbolic_disc": 48}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=50)
    ap.add_argument("--slack", type=float, nargs="+", default=[0.5, -0.5])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", help="per-case margins")
    args = ap.parse_args(argv)
    rows = []
    for kind, res in SPACES.items():
        space = build_model_space(kind, res)
        for slack in args.slack:
            t0 = time.perf_counter()
            mats = equivalence_suite(space, args.count, slack, seed=args.seed)
            dev = {n: max(abs(m[n].worst_margin - slack) for m in mats) for n in NOTIONS}
            agree = sum(m.consistent for m in mats)
            print(f"{kind:<16} slack {slack:+.2f}: {agree}/{len(mats)} consistent  "
                  + "  ".join(f"{n} {dev[n]:.4f}" for n in NOTIONS)
                  + f"  ({time.perf_counter() - t0:.1f}s)")
            for i, m in enumerate(mats):
                rows.append([kind, slack, i, m.consistent] + [m[n].worst_margin for n in NOTIONS])
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["space", "slack", "field", "consistent", *NOTIONS])
            w.writerows(rows)


if __name__ == "__main__":
    main()
