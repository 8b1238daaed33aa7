"""Calibrate the first-order budget kappa*h of the Hopf-Lax stability margin.

For each model space and calibration field the script reports the worst
margin/h over deep vertices (x and F_t(x) both at least 5 sqrt(t_max) from the
rim) for t in {0.1, 0.05, 0.02}, across resolutions.  kappa is 1.25 times the
worst ratio, rounded up.
"""

import argparse
import math

import numpy as np

from lapbounds.expr import expression_values
from lapbounds.notions import boundary_distance
from lapbounds.semigroups import STABILITY_KAPPA, TimeSchedule, stability_margins
from lapbounds.space import build_model_space, regular_domain

CALIBRATION = {
    "euclidean_grid": ["sin(x+2*y)", "exp(x)*cos(y)", "(x^2+y^2)/2"],
    "sphere2": ["z", "x*y+z", "exp(x)"],
    "hyperbolic_disc": ["x^2-y", "sin(x+y)", "cosh(r)"],
}
RESOLUTIONS = {"euclidean_grid": (51, 101), "sphere2": (64, 96, 128), "hyperbolic_disc": (48, 96)}


def worst_ratio(space, expr, times):
    f = expression_values(space, expr)
    sched = TimeSchedule.for_space(space)
    dom = regular_domain(space)
    deep = dom.interior_mask & (boundary_distance(space, dom) >= 5 * math.sqrt(sched.window[1]))
    worst = math.inf
    for t in times:
        margin, T, _ = stability_margins(space, f, t, sched)
        ok = deep & deep[T.F]
        if ok.any():
            worst = min(worst, float(margin[ok].min()) / space.mesh_scale)
    return worst


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kinds", nargs="+", default=list(CALIBRATION))
    ap.add_argument("--times", type=float, nargs="+", default=[0.1, 0.05, 0.02])
    ap.add_argument("--coarse", action="store_true", help="only the first resolution")
    args = ap.parse_args(argv)
    print(f"{'space':<16} {'res':>5} {'field':<16} {'min margin/h':>13}")
    for kind in args.kinds:
        worst = 0.0
        for res in RESOLUTIONS[kind][:1] if args.coarse else RESOLUTIONS[kind]:
            space = build_model_space(kind, res)
            for expr in CALIBRATION[kind]:
                r = worst_ratio(space, expr, args.times)
                worst = min(worst, r)
                print(f"{kind:<16} {res:>5} {expr:<16} {r:>13.3f}")
        suggested = math.ceil(-1.25 * worst) if worst < 0 else 0
        print(f"{kind}: suggested kappa {suggested}, configured {STABILITY_KAPPA[kind]}\n")


if __name__ == "__main__":
    main()
