"""Command-line front end.

Exit status: 0 when every selected check holds (or the matrix is consistent),
1 when one fails or disagrees, 2 on any execution or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .calculus import FieldError, ScalarField, SolverError, laplacian, solve_poisson
from .expr import ExpressionError, expression_values
from .geometry import (GeometryError, ComparisonProfile, approximate_max_principle,
                       check_distance_comparison, minimum_principle_check, model_set, t_KN)
from .notions import (NOTIONS, CheckConfig, NotionError, boundary_distance, equivalence_report, report_header,
                      _jsonable)
from .semigroups import (C_EFF, DEFAULT_C_EFF, ScheduleError, TimeSchedule, heat_apply, heat_derivative_field,
                         hopf_lax, hopflax_regularized_bound, stability_margins,
                         stability_tolerance)
from .space import DomainSpec, SpaceError, ball, build_model_space, load_space, regular_domain, save_space
from .suites import equivalence_suite

ALIASES = {"grid": "euclidean_grid", "euclidean_grid": "euclidean_grid",
           "sphere": "sphere2", "sphere2": "sphere2",
           "hyperbolic": "hyperbolic_disc", "hyperbolic_disc": "hyperbolic_disc",
           "interval": "interval"}
ERRORS = (SpaceError, FieldError, SolverError, NotionError, GeometryError, ScheduleError,
          ExpressionError, OSError, ValueError, KeyError, yaml.YAMLError)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# spec parsing


def _number(text):
    try:
        v = int(text)
    except ValueError:
        v = float(text)
    return v


def parse_space(spec: str):
    """``kind:resolution[,key=value...]`` (e.g. ``grid:51``, ``hyperbolic:48,radius=1.5``)
    or the path of a space file."""
    if Path(spec).is_file():
        return load_space(spec)
    head, _, rest = spec.partition(",")
    kind, sep, res = head.partition(":")
    if not sep or kind not in ALIASES:
        raise ConfigError(f"space {spec!r} is neither a file nor 'kind:resolution' "
                          f"with kind in {sorted(ALIASES)}")
    params = {}
    for item in filter(None, rest.split(",")):
        k, eq, v = item.partition("=")
        if not eq:
            raise ConfigError(f"space parameter {item!r} is not key=value")
        params[k.strip()] = _number(v)
    try:
        resolution = int(res)
    except ValueError:
        raise ConfigError(f"space resolution {res!r} is not an integer") from None
    return build_model_space(ALIASES[kind], resolution, **params)


def parse_domain(space, spec: str | None) -> DomainSpec:
    """``regular`` | ``ball:CENTER:R`` (CENTER a vertex id or ``center``) |
    ``vertices:i,j,...`` | path of a JSON file with ``interior`` and ``boundary``."""
    if spec is None or spec == "regular":
        return regular_domain(space)
    if spec.startswith("ball:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError("ball domains are written ball:CENTER:RADIUS")
        center = space.center if parts[1] == "center" else int(parts[1])
        return ball(space, center, float(parts[2]))
    if spec.startswith("vertices:"):
        ids = [int(t) for t in spec[len("vertices:"):].split(",") if t.strip()]
        return DomainSpec.from_interior(space, ids)
    path = Path(spec)
    if not path.is_file():
        raise ConfigError(f"domain {spec!r} is not a known form or an existing file")
    data = json.loads(path.read_text())
    if "boundary" in data:
        return DomainSpec(space, data["interior"], data["boundary"])
    return DomainSpec.from_interior(space, data["interior"])


def parse_field(space, spec) -> np.ndarray:
    """A number, a coordinate expression, or a ``vertex_id,value`` CSV path."""
    if isinstance(spec, (int, float)):
        return np.full(space.n, float(spec))
    spec = str(spec)
    if spec.endswith(".csv") or Path(spec).is_file():
        if not Path(spec).is_file():
            raise ConfigError(f"field file {spec!r} does not exist")
        return ScalarField.from_csv(space, spec).values
    return expression_values(space, spec)


def parse_schedule(space, spec) -> TimeSchedule:
    """``t1,t2,t3,t4[,...]`` explicit times, or ``c_eff=...,span=...,count=...``."""
    if spec is None:
        return TimeSchedule.for_space(space)
    if isinstance(spec, (list, tuple)):
        spec = ",".join(str(t) for t in spec)
    spec = str(spec)
    if "=" in spec:
        kw = {}
        for item in spec.split(","):
            k, _, v = item.partition("=")
            if k.strip() not in ("c_eff", "span", "count"):
                raise ConfigError(f"unknown schedule key {k!r}")
            kw[k.strip()] = int(v) if k.strip() == "count" else float(v)
        sched = TimeSchedule.for_space(space, **kw)
    else:
        ts = tuple(float(t) for t in spec.split(","))
        sched = TimeSchedule(ts, DEFAULT_C_EFF.get(space.kind, C_EFF))
    sched.validate(space)
    return sched


# ---------------------------------------------------------------------------
# commands


def _config(args, space) -> CheckConfig:
    cfg = CheckConfig(tol=args.tol, kappa=args.kappa)
    cfg.schedule = parse_schedule(space, args.schedule)
    return cfg


def cmd_build_space(args):
    space = parse_space(args.space)
    if not args.out:
        raise ConfigError("build-space needs --out")
    save_space(space, args.out)
    return 0, {"vertices": space.n, "edges": len(space.edges), "mesh_scale": space.mesh_scale,
               "curvature": list(space.curvature) if space.curvature else None, "path": str(args.out)}


def cmd_check(args):
    space = parse_space(args.space)
    dom = parse_domain(space, args.domain)
    f = parse_field(space, _required(args, "f"))
    eta = parse_field(space, _required(args, "eta"))
    cfg = _config(args, space)
    notions = NOTIONS if args.notion in (None, "all") else tuple(args.notion.split(","))
    matrix = equivalence_report(space, dom, f, eta, cfg, notions)
    ok = all(v.holds for v in matrix.verdicts) and matrix.consistent
    return (0 if ok else 1), {"header": report_header(space, dom, cfg), "matrix": matrix.to_dict()}


def cmd_equivalence(args):
    space = parse_space(args.space)
    dom = parse_domain(space, args.domain)
    cfg = _config(args, space)
    if args.f is not None:
        eta = parse_field(space, _required(args, "eta"))
        matrix = equivalence_report(space, dom, parse_field(space, args.f), eta, cfg)
        return (0 if matrix.consistent else 1), {"header": report_header(space, dom, cfg),
                                                  "matrix": matrix.to_dict()}
    rows = []
    for slack in args.slack:
        for i, m in enumerate(equivalence_suite(space, args.count, slack, args.seed, dom, cfg)):
            rows.append({"slack": slack, "field": i, "consistent": m.consistent,
                         "disagreements": [list(p) for p in m.disagreements],
                         "margins": {v.notion: v.worst_margin for v in m.verdicts},
                         "holds": {v.notion: v.holds for v in m.verdicts}})
    ok = all(r["consistent"] for r in rows)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["slack", "field", "consistent"] + list(NOTIONS))
            for r in rows:
                w.writerow([r["slack"], r["field"], r["consistent"]] + [repr(r["margins"][n]) for n in NOTIONS])
    return (0 if ok else 1), {"header": report_header(space, dom, cfg),
                              "consistency": sum(r["consistent"] for r in rows) / max(len(rows), 1),
                              "cases": rows}


def cmd_distance_comparison(args):
    space = parse_space(args.space)
    cfg = _config(args, space)
    window = tuple(float(t) for t in args.window.split(",")) if args.window else None
    verdict = check_distance_comparison(space, args.set, tol=args.tol, config=cfg, window=window)
    ms = model_set(space, args.set)
    lap = laplacian(space, ms.distance)
    sel = np.isfinite(lap) & (ms.distance >= verdict.details["floor"] * (1 - 1e-9))
    cap = verdict.details["cap"]
    if cap is not None:
        sel &= ms.distance <= cap * (1 + 1e-9)
    table = _margin_table(space, ms.distance[sel], lap[sel], args.bins)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["d_lo", "d_hi", "vertices", "max_laplacian", "t_KN_at_mid", "worst_margin"])
            for row in table:
                w.writerow([repr(row[k]) for k in ("d_lo", "d_hi", "vertices", "max_laplacian",
                                                     "t_KN_at_mid", "worst_margin")])
    return (0 if verdict.holds else 1), {"verdict": verdict.to_dict(), "margin_table": table}


def _margin_table(space, d, lap, bins):
    prof = ComparisonProfile.of(space)
    edges = np.linspace(d.min(), d.max(), bins + 1)
    rows = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = (d >= lo) & (d <= hi)
        if not m.any():
            continue
        margin = t_KN(prof, d[m]) - lap[m]
        rows.append({"d_lo": float(lo), "d_hi": float(hi), "vertices": int(m.sum()),
                     "max_laplacian": float(lap[m].max()),
                     "t_KN_at_mid": float(t_KN(prof, 0.5 * (lo + hi))),
                     "worst_margin": float(margin.min())})
    return rows


def cmd_min_principle(args):
    space = parse_space(args.space)
    dom = parse_domain(space, args.domain)
    if args.f is None:
        # harmonic field with seeded random boundary data
        rng = np.random.default_rng(args.seed)
        bd = np.zeros(space.n)
        bd[dom.boundary] = rng.normal(size=dom.boundary.size)
        f, _ = solve_poisson(space, dom, np.zeros(space.n), bd)
    else:
        f = parse_field(space, args.f)
    cfg = _config(args, space)
    verdict = minimum_principle_check(space, dom, f, 0.0 if args.tol is None else args.tol,
                                      verify_viscosity=args.verify_viscosity, config=cfg)
    return (0 if verdict.holds else 1), {"verdict": verdict.to_dict()}


def cmd_max_principle(args):
    space = parse_space(args.space)
    dom = parse_domain(space, args.domain)
    f = parse_field(space, _required(args, "f"))
    C = args.C
    if C is None:
        lap = laplacian(space, f)
        C = float(np.nanmax(lap[dom.interior]))
    a = [2.0 ** -n for n in range(1, args.steps + 1)]
    rep = approximate_max_principle(space, dom, f, C, a)
    if args.csv:
        rep.to_csv(args.csv)
    ok = rep.decay_holds() and rep.gradient_nonincreasing()
    out = rep.to_dict()
    out.update({"C": C, "decay_holds": rep.decay_holds(),
                "gradient_nonincreasing": rep.gradient_nonincreasing()})
    return (0 if ok else 1), out


def cmd_hopflax(args):
    space = parse_space(args.space)
    f = parse_field(space, _required(args, "f"))
    eta = parse_field(space, args.eta) if args.eta is not None else None
    cfg = _config(args, space)
    K = space.curvature[0] if space.curvature else 0.0
    results = []
    for t in args.t:
        Q, T = hopf_lax(space, f, t)
        row = {"t": t, "min": float(Q.min()), "max": float(Q.max()),
               "below_f": bool(np.all(Q <= f + 1e-12)),
               "max_transport_distance": float(T.distance.max())}
        if eta is not None:
            et = hopflax_regularized_bound(space, f, eta, t, K, T)
            row["eta_t_sup_deviation"] = float(np.max(np.abs(et - eta)))
        if space.curvature is not None:
            margin, T, res = stability_margins(space, f, t, cfg.schedule)
            deep = _deep_mask(space, cfg.collar, cfg.schedule)
            ok = np.flatnonzero(deep & deep[T.F])
            row["stability_sampled"] = int(ok.size)
            if ok.size:
                tol = stability_tolerance(space, res[ok])
                k = int(np.argmin(margin[ok] + tol))
                row.update({"stability_worst_margin": float(margin[ok].min()),
                            "stability_slack": float((margin[ok] + tol)[k]),
                            "stability_witness": int(ok[k])})
        results.append(row)
        if args.csv:
            ScalarField(space, Q).to_csv(_suffix(args.csv, t))
    good = all(r["below_f"] and r.get("stability_slack", 0.0) >= 0 for r in results)
    return (0 if good else 1), {"hopf_lax": results}


def cmd_heat(args):
    space = parse_space(args.space)
    f = parse_field(space, _required(args, "f"))
    out = {}
    if args.t:
        rows = []
        for t in args.t:
            P = heat_apply(space, f, t)
            rows.append({"t": t, "mass": float(space.measure @ P), "min": float(P.min()),
                         "max": float(P.max())})
            if args.csv:
                ScalarField(space, P).to_csv(_suffix(args.csv, t))
        out["heat"] = rows
    else:
        sched = parse_schedule(space, args.schedule)
        value, resid, _ = heat_derivative_field(space, f, sched)
        lap = laplacian(space, f)
        ok = _deep_mask(space, args.collar, sched) & np.isfinite(lap)
        if not ok.any():
            raise ConfigError("no vertex lies outside the boundary collar; refine the space")
        out["derivative"] = {"window": list(sched.window), "checked": int(ok.sum()),
                             "max_fit_residual": float(resid[ok].max()),
                             "max_abs_difference_to_laplacian": float(np.max(np.abs(value - lap)[ok]))}
        if args.csv:
            ScalarField(space, value).to_csv(args.csv)
    return 0, out


def _deep_mask(space, collar, sched):
    """Regular interior vertices at least ``collar*sqrt(t_max)`` from the rim."""
    dom = regular_domain(space)
    reach = collar * math.sqrt(sched.window[1])
    return dom.interior_mask & (boundary_distance(space, dom) >= reach)


def _suffix(path, t):
    p = Path(path)
    return p.with_name(f"{p.stem}_t{t:g}{p.suffix}")


def _required(args, name):
    value = getattr(args, name)
    if value is None:
        raise ConfigError(f"--{name} is required")
    return value


COMMANDS = {
    "build-space": cmd_build_space, "check": cmd_check, "equivalence": cmd_equivalence,
    "distance-comparison": cmd_distance_comparison, "min-principle": cmd_min_principle,
    "max-principle": cmd_max_principle, "hopflax": cmd_hopflax, "heat": cmd_heat,
}


# ---------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lapbounds", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--config", help="YAML or JSON file; flags override its values")
        p.add_argument("--space", help="kind:resolution[,key=value] or a space file")
        p.add_argument("--domain", help="regular | ball:CENTER:R | vertices:i,j | JSON file")
        p.add_argument("--f", help="expression, number or CSV file")
        p.add_argument("--eta", help="expression, number or CSV file")
        p.add_argument("--tol", type=float, help="override every tolerance")
        p.add_argument("--kappa", type=float, help="kappa in the default tolerance kappa*h^2")
        p.add_argument("--schedule", help="t1,t2,t3,t4 or c_eff=..,span=..,count=..")
        p.add_argument("--out", help="report path (default: stdout)")
        p.add_argument("--seed", type=int)
        p.add_argument("--no-timestamp", action="store_true", default=None)
        return p

    common(sub.add_parser("build-space", help="build a model space and save it"))
    p = common(sub.add_parser("check", help="run the notion checkers on one (f, eta)"))
    p.add_argument("--notion", help="all or a comma list of " + ",".join(NOTIONS))
    p = common(sub.add_parser("equivalence", help="agreement suites over random fields"))
    p.add_argument("--count", type=int)
    p.add_argument("--slack", type=float, nargs="+")
    p.add_argument("--csv")
    p = common(sub.add_parser("distance-comparison", help="Laplacian of the distance to a minimal set"))
    p.add_argument("--set", help="half-plane | hemisphere | geodesic-half-plane")
    p.add_argument("--window", help="foot-point window lo,hi (localized variant)")
    p.add_argument("--bins", type=int)
    p.add_argument("--csv")
    p = common(sub.add_parser("min-principle", help="minimum principle for a field"))
    p.add_argument("--verify-viscosity", action="store_true", default=None)
    p = common(sub.add_parser("max-principle", help="approximate maximum principle sequence"))
    p.add_argument("--C", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--csv")
    p = common(sub.add_parser("hopflax", help="Hopf-Lax semigroup, eta_t and stability"))
    p.add_argument("--t", type=float, nargs="+")
    p.add_argument("--csv")
    p = common(sub.add_parser("heat", help="heat semigroup or small-time derivative"))
    p.add_argument("--t", type=float, nargs="+")
    p.add_argument("--collar", type=float, help="collar in units of sqrt(t_max)")
    p.add_argument("--csv")
    return parser


DEFAULTS = {"domain": None, "seed": 0, "no_timestamp": False, "notion": "all", "count": 50,
            "slack": [0.5, -0.5], "bins": 10, "collar": 5.0, "steps": 12, "verify_viscosity": False}


def load_config(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {path!r} does not exist")
    text = p.read_text()
    try:
        data = json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"{p.name}: {exc}") from None
    if not data:
        raise ConfigError(f"{p.name}: config is empty")
    if not isinstance(data, dict):
        raise ConfigError(f"{p.name}: config must be a mapping of option names")
    return {k.replace("-", "_"): v for k, v in data.items()}


def merge_config(args, parser):
    """Fill unset flags from the config file, then from defaults; flags win."""
    if args.config:
        data = load_config(args.config)
        data.pop("command", None)
        known = vars(args)
        for key, value in data.items():
            if key not in known:
                raise ConfigError(f"{Path(args.config).name}: unknown option {key!r}")
            if known[key] is None:
                setattr(args, key, value)
    for key, value in DEFAULTS.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)
    if getattr(args, "space", None) is None:
        raise ConfigError("--space is required")
    for name in ("f", "eta"):
        v = getattr(args, name, None)
        if isinstance(v, str) and v.endswith(".csv") and not Path(v).is_file():
            raise ConfigError(f"--{name}: file {v!r} does not exist")
    return args


def emit(report: dict, args):
    text = json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"
    # build-space writes the space itself to --out
    if args.out and args.command != "build-space":
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # "lapbounds --config run.yaml" takes the command from the file
    if argv and argv[0] == "--config" and len(argv) >= 2:
        try:
            command = load_config(argv[1]).get("command")
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        if command not in COMMANDS:
            print(f"error: config must name a command, one of {sorted(COMMANDS)}", file=sys.stderr)
            return 2
        argv = [command] + argv
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    if not args.command:
        parser.print_help(sys.stderr)
        return 2
    try:
        args = merge_config(args, parser)
        status, result = COMMANDS[args.command](args)
        report = {"command": args.command, "status": status, "result": result,
                  "seed": args.seed, "version": __version__}
        if not args.no_timestamp:
            report["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
        emit(report, args)
        return status
    except (ConfigError,) + ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
