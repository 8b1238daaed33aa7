"""Refinement tables: Laplacian consistency on curved spaces, heat-derivative
consistency on the grid, and the sharp distance comparison."""

import argparse
import math

import numpy as np

from lapbounds.calculus import laplacian
from lapbounds.expr import expression_values
from lapbounds.geometry import check_distance_comparison
from lapbounds.notions import boundary_distance
from lapbounds.semigroups import TimeSchedule, heat_derivative_field
from lapbounds.space import build_model_space, regular_domain
from lapbounds.suites import random_smooth_field


def orders(hs, errs):
    return [math.log(errs[i] / errs[i + 1]) / math.log(hs[i] / hs[i + 1]) for i in range(len(errs) - 1)]


def table(title, rows, hs, errs):
    print(title)
    for r, h, e in zip(rows, hs, errs):
        print(f"  {r:>5}  h={h:.4e}  error={e:.3e}")
    print("  observed orders:", ", ".join(f"{o:.2f}" for o in orders(hs, errs)), "\n")


def laplacian_sphere(resolutions):
    hs, errs = [], []
    for res in resolutions:
        s = build_model_space("sphere2", res)
        z = expression_values(s, "z")
        dom = regular_domain(s)
        errs.append(float(np.abs(laplacian(s, z) + 2 * z)[dom.interior].max()))
        hs.append(s.mesh_scale)
    table("sphere2: max |Lap z + 2z| on the regular band", resolutions, hs, errs)


def heat_grid(resolutions, count, seed):
    hs, errs, region = [], [], None
    seeds = np.random.SeedSequence(seed).generate_state(count)
    for res in resolutions:
        g = build_model_space("euclidean_grid", res)
        sched = TimeSchedule.for_space(g)
        if region is None:
            dom = regular_domain(g)
            deep = dom.interior_mask & (boundary_distance(g, dom) >= 5 * math.sqrt(sched.window[1]))
            region = float(np.abs(g.coords[deep]).max())
        sel = np.all(np.abs(g.coords) <= region + 1e-9, axis=1)
        F = np.column_stack([random_smooth_field(g, np.random.default_rng(int(k))) for k in seeds])
        value, _, _ = heat_derivative_field(g, F, sched)
        lap = np.column_stack([laplacian(g, F[:, j]) for j in range(count)])
        errs.append(float(np.abs(value - lap)[sel].max()))
        hs.append(g.mesh_scale)
    table(f"euclidean_grid: max |heat derivative - Lap f| on |x|,|y| <= {region:.2f}",
          resolutions, hs, errs)


def distance(kind, resolutions):
    hs, errs = [], []
    for res in resolutions:
        s = build_model_space(kind, res)
        v = check_distance_comparison(s)
        errs.append(v.details["max_abs_error"])
        hs.append(s.mesh_scale)
    table(f"{kind}: max |Lap d - t_KN(d)| for 3h <= d <= cap", resolutions, hs, errs)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--fields", type=int, default=20)
    args = ap.parse_args(argv)
    laplacian_sphere([32, 64, 128])
    heat_grid([51, 101], args.fields, args.seed)
    distance("sphere2", [48, 96, 144])
    distance("hyperbolic_disc", [48, 96, 192])


if __name__ == "__main__":
    main()
