"""Five independent checkers for ``Lap f <= eta on a domain`` and their agreement.

Each checker returns a :class:`Verdict` whose ``worst_margin`` is a signed
slack in units of the Laplacian (positive = satisfied with room), so margins
of different checkers are directly comparable.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .calculus import FieldError, PoissonSystem, field_values
from .semigroups import TimeSchedule, heat_derivative_field
from .space import DomainSpec, MMGraph, SpaceError

NOTIONS = ("dist_form", "dist_dual", "comparison", "viscosity", "heatflow")

# kappa in the default tolerance kappa*h^2, from the heat-derivative consistency tables
KAPPA = {"interval": 8.0, "euclidean_grid": 8.0, "sphere2": 1.0, "hyperbolic_disc": 1.0}


class NotionError(ValueError):
    pass


@dataclass
class CheckConfig:
    """Shared knobs of the five checkers."""

    tol: float | None = None
    kappa: float | None = None
    schedule: TimeSchedule | None = None
    collar: float = 5.0
    extension: object = "zero"
    ball_centers: int = 6
    ball_radii: tuple = (3.0, 6.0, 12.0)
    delta_min: float = 1e-4
    delta_max: float = 1e3
    delta_ratio: float = 1.05
    tilts: tuple = (0.1, 1.0, 10.0)
    solver_tol: float = 1e-10

    def tolerance(self, space: MMGraph, residual: float = 0.0) -> float:
        if self.tol is not None:
            return float(self.tol)
        kappa = self.kappa if self.kappa is not None else KAPPA.get(space.kind, 1.0)
        return kappa * space.mesh_scale ** 2 + residual

    def deltas(self) -> np.ndarray:
        if not (0 < self.delta_min < self.delta_max and self.delta_ratio > 1):
            raise NotionError("viscosity delta grid is empty")
        k = math.ceil(math.log(self.delta_max / self.delta_min) / math.log(self.delta_ratio)) + 1
        pos = np.geomspace(self.delta_min, self.delta_max, k)
        return np.r_[-pos[::-1], 0.0, pos]


@dataclass
class Verdict:
    notion: str
    holds: bool
    worst_margin: float
    witness: object
    tolerance_used: float
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.worst_margin = float(self.worst_margin)
        self.tolerance_used = float(self.tolerance_used)
        self.holds = bool(self.worst_margin >= -self.tolerance_used)

    def to_dict(self, details: bool = True) -> dict:
        out = {"notion": self.notion, "holds": self.holds,
               "worst_margin": _json_float(self.worst_margin),
               "witness": self.witness, "tolerance_used": self.tolerance_used}
        if details:
            out["details"] = _jsonable(self.details)
        return out


@dataclass
class AgreementMatrix:
    verdicts: list
    consistent: bool = field(init=False)
    disagreements: list = field(init=False)

    def __post_init__(self):
        flags = [v.holds for v in self.verdicts]
        self.consistent = len(set(flags)) <= 1
        self.disagreements = [(a.notion, b.notion) for i, a in enumerate(self.verdicts)
                              for b in self.verdicts[i + 1:] if a.holds != b.holds]

    def __getitem__(self, notion) -> Verdict:
        for v in self.verdicts:
            if v.notion == notion:
                return v
        raise KeyError(notion)

    def to_dict(self) -> dict:
        # full margin data is always kept; it matters most on disagreement
        return {"verdicts": [v.to_dict() for v in self.verdicts],
                "consistent": self.consistent,
                "disagreements": [list(p) for p in self.disagreements]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _json_float(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _json_float(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def verdict_from_dict(d: dict) -> Verdict:
    margin = d["worst_margin"]
    return Verdict(d["notion"], d["holds"], math.inf if margin is None else margin,
                   d["witness"], d["tolerance_used"], d.get("details", {}))


# ---------------------------------------------------------------------------
# input handling


def _inputs(space: MMGraph, dom: DomainSpec, f, eta):
    if dom.parent is not space:
        raise NotionError("domain belongs to a different space")
    try:
        fv = field_values(space, f)
        ev = field_values(space, eta)
    except FieldError as exc:
        raise NotionError(str(exc)) from exc
    bad = dom.closure_mask & ~np.isfinite(fv)
    if bad.any():
        raise NotionError(f"f is undefined at vertex {int(np.flatnonzero(bad)[0])} of the domain closure")
    bad = dom.interior_mask & ~np.isfinite(ev)
    if bad.any():
        raise NotionError(f"eta is undefined at interior vertex {int(np.flatnonzero(bad)[0])}")
    return fv, ev


def _min_at(values, ids):
    k = int(np.argmin(values))
    return float(values[k]), int(ids[k])


# ---------------------------------------------------------------------------
# distributional checkers


def check_distributional_form(space: MMGraph, dom: DomainSpec, f, eta, tol=None,
                              config: CheckConfig | None = None) -> Verdict:
    """``-E(f, phi) <= sum m phi eta`` over the vertex hats supported in the interior.

    The margin of the hat at ``x`` is ``(sum m phi eta + E(f, phi)) / sum m phi``.
    """
    cfg = config or CheckConfig()
    fv, ev = _inputs(space, dom, f, eta)
    u, v = space.edges[:, 0], space.edges[:, 1]
    keep = dom.closure_mask[u] & dom.closure_mask[v]
    u, v, w = u[keep], v[keep], space.weights[keep]
    df = w * (fv[v] - fv[u])
    # E(f, 1_x) = sum over edges at x of w (f(x) - f(y))
    energy = np.bincount(u, -df, minlength=space.n) + np.bincount(v, df, minlength=space.n)
    I = dom.interior
    m = space.measure[I]
    margins = (m * ev[I] + energy[I]) / m
    worst, x = _min_at(margins, I)
    tol = cfg.tolerance(space) if tol is None else tol
    return Verdict("dist_form", True, worst, x, tol, {"hats": int(I.size)})


def check_distributional_dual(space: MMGraph, dom: DomainSpec, f, eta, tol=None,
                              config: CheckConfig | None = None) -> Verdict:
    """``sum m f Lap(phi) <= sum m phi eta`` over interior hats, never forming ``Lap f``."""
    cfg = config or CheckConfig()
    fv, ev = _inputs(space, dom, f, eta)
    I = dom.interior
    L = space.generator[:, I].tocsc()
    rows_ok = dom.closure_mask[L.indices]
    if not rows_ok.all():
        raise NotionError("a test hat's Laplacian leaves the domain closure")
    mf = np.where(dom.closure_mask, space.measure * fv, 0.0)
    pairing = L.T @ mf
    m = space.measure[I]
    margins = (m * ev[I] - pairing) / m
    worst, x = _min_at(margins, I)
    tol = cfg.tolerance(space) if tol is None else tol
    return Verdict("dist_dual", True, worst, x, tol, {"hats": int(I.size)})


# ---------------------------------------------------------------------------
# subdomain sampler shared by the comparison and viscosity checkers


@dataclass
class Subdomain:
    dom: DomainSpec
    center: int
    radius: float

    def describe(self) -> str:
        return f"ball(center={self.center}, r={self.radius:.6g}, |interior|={self.dom.interior.size})"


def ball_subdomains(space: MMGraph, dom: DomainSpec, config: CheckConfig | None = None):
    """Metric balls around strided interior centers, clipped to the domain interior."""
    cfg = config or CheckConfig()
    I = dom.interior
    k = min(cfg.ball_centers, I.size)
    if k <= 0:
        return []
    centers = I[np.unique(np.linspace(0, I.size - 1, k + 2).round().astype(int)[1:-1])] \
        if I.size > 2 else I
    out, seen = [], set()
    for c in centers:
        d = space.distances_from(int(c))
        for mult in cfg.ball_radii:
            r = mult * space.mesh_scale
            inner = np.flatnonzero((d < r) & dom.interior_mask)
            if inner.size < 2:
                continue
            key = inner.tobytes()
            if key in seen:
                continue
            seen.add(key)
            sub = DomainSpec.from_interior(space, inner)
            if not np.all(dom.closure_mask[sub.boundary]):
                raise NotionError("sampled subdomain leaves the domain closure")
            out.append(Subdomain(sub, int(c), float(r)))
    return out


def _singleton_parts(space, dom, fv):
    """Per-vertex ``(f - g0, v)`` for the one-vertex subdomains ``{x}``.

    ``g0`` is harmonic at ``x`` with ``g0 = f`` on the one-ring, ``v = m/deg``
    solves ``Lap v = -1`` there.
    """
    I = dom.interior
    Wf = space.adjacency[I] @ np.where(dom.closure_mask, fv, 0.0)
    deg = space.degree[I]
    return fv[I] - Wf / deg, space.measure[I] / deg


# ---------------------------------------------------------------------------
# comparison


def check_comparison(space: MMGraph, dom: DomainSpec, f, eta, tol=None,
                     config: CheckConfig | None = None, subdomains=None) -> Verdict:
    """Compare ``f`` against the extremal competitor ``Lap g = eta``, ``g = f`` on each
    sampled boundary.

    The margin on a subdomain is ``min (f - g)/v`` with ``v`` its torsion function
    (``Lap v = -1``, ``v = 0`` on the boundary); it is nonnegative iff ``g <= f``.
    """
    cfg = config or CheckConfig()
    fv, ev = _inputs(space, dom, f, eta)
    subs = ball_subdomains(space, dom, cfg) if subdomains is None else subdomains
    # singletons: g(x) = g0(x) + v(x) * eta(x)
    R0, V = _singleton_parts(space, dom, fv)
    I = dom.interior
    worst, wit = _min_at((R0 + V * ev[I]) / V, I)
    witness = f"singleton({wit})"
    worst_res = 0.0
    for sub in subs:
        sd = sub.dom
        system = PoissonSystem(space, sd, cfg.solver_tol)
        J, B = sd.interior, sd.boundary
        rhs = np.c_[ev[J], -np.ones(J.size)]
        bd = np.c_[fv[B], np.zeros(B.size)]
        sol, res = system.solve_interior(rhs, bd)
        worst_res = max(worst_res, res)
        g, v = sol[:, 0], sol[:, 1]
        margin, x = _min_at((fv[J] - g) / v, J)
        if margin < worst:
            worst, witness = margin, f"{sub.describe()} at {x}"
    scale = 1.0 + float(np.max(np.abs(ev[I])))
    tol = cfg.tolerance(space, worst_res * scale) if tol is None else tol
    return Verdict("comparison", True, worst, witness, tol,
                   {"subdomains": len(subs), "singletons": int(I.size),
                    "solver_residual": worst_res})


# ---------------------------------------------------------------------------
# viscosity


def _touch_margins(R, V, eta_loc, deltas, tie, mode):
    """Worst margin over a one-parameter candidate family ``phi0 = g - c v``.

    ``R = f - g`` and ``V = v`` on the subdomain interior (``f - g = 0`` on its
    boundary).  The candidate with parameter ``c`` touches ``f`` from below at an
    interior vertex iff ``min(R + c V) <= tie``; its touching point is the argmin.
    ``mode`` 'shift' has ``psi = eta + c`` (margin ``-c``); 'const' has
    ``psi = c`` (margin ``eta(x*) - c``).
    """
    D = R[:, None] + V[:, None] * deltas[None, :]
    xi = np.argmin(D, axis=0)
    touch = D[xi, np.arange(deltas.size)] <= tie
    if not touch.any():
        return math.inf, -1
    if mode == "shift":
        marg = -deltas
    else:
        marg = eta_loc[xi] - deltas
    marg = np.where(touch, marg, np.inf)
    k = int(np.argmin(marg))
    return float(marg[k]), int(xi[k])


def check_viscosity(space: MMGraph, dom: DomainSpec, f, eta, tol=None,
                    config: CheckConfig | None = None, subdomains=None) -> Verdict:
    """Touch ``f`` from below by Poisson-solution candidates and compare their Laplacian
    with ``eta`` at the touching point.

    Candidates on each sampled subdomain solve ``Lap phi0 = psi`` with ``phi0 = f`` on
    its boundary, for ``psi`` in ``{eta + delta, c, eta +- c d(., center)^2}`` and the
    literal constants; a candidate counts when it can be shifted down to touch ``f``
    at an interior vertex ``x*``.  The recorded value is ``eta(x*) - Lap phi(x*)``.
    """
    cfg = config or CheckConfig()
    fv, ev = _inputs(space, dom, f, eta)
    deltas = cfg.deltas()
    tilts = np.asarray(cfg.tilts, dtype=float)
    I = dom.interior
    scale = 1.0 + float(np.max(np.abs(fv[dom.closure_mask])))
    # singleton candidates are closed-form; subdomain ones carry the solver error
    tie0 = 1e-12 * scale
    tie = 10 * cfg.solver_tol * scale
    results = []

    # singletons {x}: eta + delta and constant-psi families, vectorized over x
    R0, V = _singleton_parts(space, dom, fv)
    Reta = R0 + V * ev[I]
    D = Reta[:, None] + V[:, None] * deltas[None, :]
    touch = D <= tie0
    marg = np.where(touch, -deltas[None, :], np.inf).min(axis=1)
    k = int(np.argmin(marg))
    results.append((float(marg[k]), f"singleton({int(I[k])})", "eta+delta"))
    Dc = R0[:, None] + V[:, None] * deltas[None, :]
    margc = np.where(Dc <= tie0, ev[I][:, None] - deltas[None, :], np.inf).min(axis=1)
    k = int(np.argmin(margc))
    results.append((float(margc[k]), f"singleton({int(I[k])})", "constant psi"))

    subs = ball_subdomains(space, dom, cfg) if subdomains is None else subdomains
    worst_res = 0.0
    for sub in subs:
        sd = sub.dom
        J, B = sd.interior, sd.boundary
        d2 = space.distances_from(sub.center)[J] ** 2
        system = PoissonSystem(space, sd, cfg.solver_tol)
        rhs = np.c_[ev[J], -np.ones(J.size), d2, np.zeros(J.size)]
        zero = np.zeros(B.size)
        bd = np.c_[fv[B], zero, zero, fv[B]]
        sol, res = system.solve_interior(rhs, bd)
        worst_res = max(worst_res, res)
        g_eta, v, g_d2, g0 = sol.T
        fJ, eJ = fv[J], ev[J]
        tag = sub.describe()
        m, x = _touch_margins(fJ - g_eta, v, eJ, deltas, tie, "shift")
        results.append((m, f"{tag} at {J[x]}" if x >= 0 else tag, "eta+delta"))
        m, x = _touch_margins(fJ - g0, v, eJ, deltas, tie, "const")
        results.append((m, f"{tag} at {J[x]}" if x >= 0 else tag, "constant psi"))
        for sign in (1.0, -1.0):
            # psi = eta + sign*c*d^2: phi0 = g_eta + sign*c*g_d2
            Rt = (fJ - g_eta)[:, None] - sign * g_d2[:, None] * tilts[None, :]
            xi = np.argmin(Rt, axis=0)
            ok = Rt[xi, np.arange(tilts.size)] <= tie
            mt = np.where(ok, -sign * tilts * d2[xi], np.inf)
            j = int(np.argmin(mt))
            results.append((float(mt[j]), f"{tag} at {J[xi[j]]}", f"eta{'+' if sign > 0 else '-'}c*d^2"))
        # literal constants: phi = min f over the closure touches at an interior argmin
        closure = np.r_[J, B]
        fmin = fv[closure].min()
        if fJ.min() <= fmin + tie:
            x = int(J[np.argmin(fJ)])
            results.append((float(ev[x]), f"{tag} at {x}", "constant function"))

    worst, witness, family = min(results, key=lambda r: r[0])
    tol = cfg.tolerance(space, worst_res * (1.0 + float(np.max(np.abs(ev[I]))))) if tol is None else tol
    if not math.isfinite(worst):
        witness, family = None, None
    return Verdict("viscosity", True, worst, witness, tol,
                   {"subdomains": len(subs), "family": family,
                    "candidates": int(len(results)), "solver_residual": worst_res})


# ---------------------------------------------------------------------------
# heat flow


def boundary_distance(space: MMGraph, dom: DomainSpec, chunk: int = 512) -> np.ndarray:
    """Metric distance from every vertex to ``dom.boundary`` (inf without boundary)."""
    out = np.full(space.n, np.inf)
    B = dom.boundary
    for s in range(0, B.size, chunk):
        out = np.minimum(out, space.distance_rows(B[s:s + chunk]).min(axis=0))
    return out


def check_heatflow(space: MMGraph, dom: DomainSpec, f, eta, tol=None,
                   config: CheckConfig | None = None, sched: TimeSchedule | None = None) -> Verdict:
    """Small-time heat quotient of the extended ``f`` against ``eta``.

    Only interior vertices at distance at least ``collar * sqrt(t_max)`` from the
    boundary are judged; the margin is ``eta - (value + fit_residual)``.
    """
    cfg = config or CheckConfig()
    fv, ev = _inputs(space, dom, f, eta)
    sched = sched or cfg.schedule or TimeSchedule.for_space(space)
    if isinstance(cfg.extension, str):
        if cfg.extension != "zero":
            raise NotionError(f"unknown extension {cfg.extension!r}")
        ext = np.where(dom.closure_mask, fv, 0.0)
    else:
        ext = field_values(space, cfg.extension).copy()
        if not np.all(np.isfinite(ext)):
            raise NotionError("the global extension must be finite everywhere")
        ext[dom.closure_mask] = fv[dom.closure_mask]
    value, resid, qmax = heat_derivative_field(space, ext, sched)
    dist = boundary_distance(space, dom)
    reach = cfg.collar * math.sqrt(sched.window[1])
    I = dom.interior
    deep = I[dist[I] >= reach]
    collar = I[dist[I] < reach]
    if deep.size == 0:
        raise NotionError("the whole interior lies inside the boundary collar")
    margins = ev - (value + resid)
    worst, x = _min_at(margins[deep], deep)
    details = {"checked": int(deep.size), "collar": int(collar.size),
               "collar_worst_margin": float(margins[collar].min()) if collar.size else None,
               "max_fit_residual": float(resid[deep].max()),
               "window": list(sched.window), "c_eff": sched.c_eff}
    tol = cfg.tolerance(space) if tol is None else tol
    return Verdict("heatflow", True, worst, x, tol, details)


# ---------------------------------------------------------------------------

CHECKERS = {
    "dist_form": check_distributional_form,
    "dist_dual": check_distributional_dual,
    "comparison": check_comparison,
    "viscosity": check_viscosity,
    "heatflow": check_heatflow,
}


def run_checker(notion: str, space, dom, f, eta, config: CheckConfig | None = None,
                subdomains=None) -> Verdict:
    cfg = config or CheckConfig()
    try:
        fn = CHECKERS[notion]
    except KeyError:
        raise NotionError(f"unknown notion {notion!r}") from None
    if notion in ("comparison", "viscosity"):
        return fn(space, dom, f, eta, config=cfg, subdomains=subdomains)
    return fn(space, dom, f, eta, config=cfg)


def equivalence_report(space: MMGraph, dom: DomainSpec, f, eta,
                       config: CheckConfig | None = None, notions=NOTIONS) -> AgreementMatrix:
    """Run the selected checkers with one tolerance policy and compare verdicts."""
    cfg = config or CheckConfig()
    subs = ball_subdomains(space, dom, cfg) if {"comparison", "viscosity"} & set(notions) else None
    return AgreementMatrix([run_checker(n, space, dom, f, eta, cfg, subs) for n in notions])


def report_header(space: MMGraph, dom: DomainSpec, config: CheckConfig) -> dict:
    """Tolerance provenance embedded in every report."""
    sched = config.schedule or TimeSchedule.for_space(space)
    return {"mesh_scale": space.mesh_scale, "kind": space.kind, "vertices": space.n,
            "curvature": list(space.curvature) if space.curvature else None,
            "domain": dom.describe(),
            "kappa": config.kappa if config.kappa is not None else KAPPA.get(space.kind, 1.0),
            "schedule": list(sched.t_values), "solver_tol": config.solver_tol,
            "config": _jsonable({k: v for k, v in asdict(config).items()
                                 if k not in ("schedule", "extension")})}
