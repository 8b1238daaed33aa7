"""Comparison geometry on model spaces: the mean-curvature profile ``t_KN``,
distance-function Laplacian comparison, and the minimum / approximate maximum
principles."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .calculus import field_values, gradient_modulus, laplacian, solve_poisson
from .notions import CheckConfig, NotionError, Verdict, boundary_distance, check_distributional_form
from .semigroups import TimeSchedule, heat_derivative_field
from .space import DomainSpec, MMGraph, SpaceError


class GeometryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# t_KN


@dataclass(frozen=True)
class ComparisonProfile:
    K: float
    N: float

    def __post_init__(self):
        if not self.N >= 1:
            raise GeometryError(f"N must be >= 1, got {self.N}")

    @property
    def domain(self) -> tuple[float, float]:
        """Open interval ``I_KN`` on which ``t_KN`` is defined."""
        if self.K > 0:
            if self.N == 1:
                raise GeometryError("t_KN is undefined for N = 1 and K != 0")
            half = 0.5 * math.pi * math.sqrt((self.N - 1) / self.K)
            return -half, half
        return -math.inf, math.inf

    @classmethod
    def of(cls, space: MMGraph) -> "ComparisonProfile":
        if space.curvature is None:
            raise GeometryError("space has no curvature tag")
        return cls(*space.curvature)


def t_KN(profile: ComparisonProfile, x):
    """Model mean curvature at signed distance ``x`` (scalar or array)."""
    K, N = profile.K, profile.N
    arr = np.asarray(x, dtype=float)
    if K == 0:
        out = np.zeros_like(arr)
    else:
        if N == 1:
            raise GeometryError("t_KN is undefined for N = 1 and K != 0")
        lo, hi = profile.domain
        if np.any((arr <= lo) | (arr >= hi)) or not np.all(np.isfinite(arr)):
            raise GeometryError(f"argument outside I_KN = ({lo}, {hi})")
        if K > 0:
            out = -math.sqrt(K * (N - 1)) * np.tan(math.sqrt(K / (N - 1)) * arr)
        else:
            out = math.sqrt(-K * (N - 1)) * np.tanh(math.sqrt(-K / (N - 1)) * arr)
    return float(out) if np.ndim(x) == 0 else out


# ---------------------------------------------------------------------------
# model sets


@dataclass
class ModelSet:
    """A perimeter-minimizing set ``E`` with closed-form distance and foot points."""

    name: str
    members: np.ndarray  # boolean mask of vertices in the closure of E
    distance: np.ndarray  # d(., E) at every vertex
    foot: np.ndarray  # coordinate of the nearest point of the boundary of E
    cap: float  # largest distance where comparisons are made


MODEL_SETS = {"euclidean_grid": "half-plane", "sphere2": "hemisphere",
              "hyperbolic_disc": "geodesic-half-plane"}


def model_set(space: MMGraph, name: str | None = None) -> ModelSet:
    """Half-plane ``{x <= 0}`` on grids, southern hemisphere on the sphere, and the
    half-plane below the horizontal diameter in the Poincare disc."""
    kind = space.kind
    expected = MODEL_SETS.get(kind)
    if expected is None:
        raise GeometryError(f"no built-in minimal set on a {kind!r} space")
    if name is not None and name != expected:
        raise GeometryError(f"set {name!r} is not available on {kind}; use {expected!r}")
    c = space.coords
    tiny = 1e-12
    if kind == "euclidean_grid":
        d = np.maximum(c[:, 0], 0.0)
        foot = c[:, 1] if space.dim > 1 else np.zeros(space.n)
        cap = math.inf
    elif kind == "sphere2":
        d = np.maximum(0.5 * math.pi - c[:, 0], 0.0)
        foot = c[:, 1]
        cap = math.pi / 3
    else:
        x, y = c[:, 0], c[:, 1]
        r2 = x ** 2 + y ** 2
        d = np.arcsinh(2 * np.maximum(y, 0.0) / (1 - r2))
        z = x + 1j * y
        foot = np.log(np.abs(1 + z) / np.abs(1 - z))
        cap = math.inf
    return ModelSet(expected, d <= tiny, d, foot, cap)


def distance_to_set(space: MMGraph, E, chunk: int = 512) -> np.ndarray:
    """Multi-source distance ``min_{e in E} d(., e)`` over the vertices of ``E``."""
    E = np.flatnonzero(E) if np.asarray(E).dtype == bool else np.asarray(E, dtype=np.int64)
    if E.size == 0:
        raise GeometryError("the set E is empty")
    out = np.full(space.n, np.inf)
    for s in range(0, E.size, chunk):
        out = np.minimum(out, space.distance_rows(E[s:s + chunk]).min(axis=0))
    return out


def comparison_domain(space: MMGraph, dist, floor: float, cap: float = math.inf,
                      window_mask=None) -> DomainSpec:
    """Regular vertices with ``floor <= d_E <= cap`` (optionally inside a foot window)."""
    sel = (space.regular & space.admissible & (dist >= floor * (1 - 1e-9))
           & (dist <= cap * (1 + 1e-9)))
    if window_mask is not None:
        sel &= window_mask
    if not sel.any():
        raise GeometryError("the complement of E has no interior at this resolution")
    return DomainSpec.from_interior(space, np.flatnonzero(sel))


def check_distance_comparison(space: MMGraph, E=None, dom: DomainSpec | None = None, tol=None,
                              config: CheckConfig | None = None, window=None,
                              floor_mult: float = 3.0, heat_collar: float = 7.0) -> Verdict:
    """Verify ``Lap d_E <= t_KN(d_E)`` off ``E``.

    ``E`` is a model-set name (closed-form distance) or a vertex set (multi-source
    distance).  ``window=(lo, hi)`` keeps only vertices whose foot point lies in the
    window (model sets only).  The verdict combines the one-ring (distributional)
    margins on the domain with heat-quotient margins at vertices far enough from
    ``E`` and from the domain boundary.  That distance is ``heat_collar *
    sqrt(t_max)``: ``d_E`` is kinked on the boundary of ``E`` and has flux through
    the rim of the space, so Gaussian leakage reaches further than for the
    compactly supported extensions of the heat-flow checker.
    """
    cfg = config or CheckConfig()
    profile = ComparisonProfile.of(space)
    h = space.mesh_scale
    if E is None or isinstance(E, str):
        ms = model_set(space, E)
        dist, cap, name = ms.distance, ms.cap, ms.name
        wmask = None
        if window is not None:
            wmask = (ms.foot >= window[0]) & (ms.foot <= window[1])
    else:
        if window is not None:
            raise GeometryError("foot windows need a model set")
        mask = np.zeros(space.n, dtype=bool)
        mask[np.asarray(E, dtype=np.int64)] = True
        dist, cap, name, wmask = distance_to_set(space, mask), math.inf, "vertex set", None
        if mask.all():
            raise GeometryError("E has an empty complement")
    if profile.K > 0:
        cap = min(cap, profile.domain[1] * (1 - 1e-9))
    if dom is None:
        dom = comparison_domain(space, dist, floor_mult * h, cap, wmask)
    elif np.any(dist[dom.interior] < floor_mult * h * (1 - 1e-12)):
        raise GeometryError("domain interior comes closer to E than the distance floor")
    bound = np.full(space.n, np.nan)
    bound[dom.interior] = t_KN(profile, dist[dom.interior])
    form = check_distributional_form(space, dom, dist, bound, tol=0.0, config=cfg)
    lap = laplacian(space, dist)
    I = dom.interior
    err = np.abs(lap[I] - bound[I])
    details = {"set": name, "K": profile.K, "N": profile.N, "floor": floor_mult * h,
               "cap": cap if math.isfinite(cap) else None,
               "vertices": int(I.size), "form_worst_margin": form.worst_margin,
               "max_abs_error": float(err.max()),
               "d_range": [float(dist[I].min()), float(dist[I].max())]}
    worst, witness = form.worst_margin, form.witness
    # heat-quotient margins on the global distance function
    sched = cfg.schedule or TimeSchedule.for_space(space)
    reach = heat_collar * math.sqrt(sched.window[1])
    deep = I[(boundary_distance(space, dom)[I] >= reach) & (dist[I] >= reach)]
    details["heat_checked"] = int(deep.size)
    resid = 0.0
    if deep.size:
        value, res, _ = heat_derivative_field(space, dist, sched)
        hm = bound[deep] - (value[deep] + res[deep])
        k = int(np.argmin(hm))
        details["heat_worst_margin"] = float(hm[k])
        resid = float(res[deep].max())
        if hm[k] < worst:
            worst, witness = float(hm[k]), int(deep[k])
    tol = cfg.tolerance(space) if tol is None else tol
    return Verdict("distance_comparison", True, worst, witness, tol, details)


# ---------------------------------------------------------------------------
# minimum principle


def minimum_principle_check(space: MMGraph, dom: DomainSpec, f, tol: float = 0.0,
                            verify_viscosity: bool = False, config: CheckConfig | None = None) -> Verdict:
    """``min over the interior >= min over the boundary - tol``.

    On failure the perturbation ``f - eps*v`` with ``Lap v = 1``, ``v > 0`` is
    built and the report gives the threshold below which it keeps an interior
    minimum, where the touching function ``eps*v`` has Laplacian ``eps > 0``.
    """
    if dom.boundary.size == 0:
        raise GeometryError("the minimum principle needs a nonempty boundary")
    fv = field_values(space, f)
    if not np.all(np.isfinite(fv[dom.closure_mask])):
        raise GeometryError("f must be defined on the domain closure")
    I, B = dom.interior, dom.boundary
    k = int(np.argmin(fv[I]))
    x0, min_i = int(I[k]), float(fv[I][k])
    min_b = float(fv[B].min())
    details = {"min_interior": min_i, "min_boundary": min_b}
    if verify_viscosity:
        from .notions import check_viscosity
        hyp = check_viscosity(space, dom, fv, np.zeros(space.n), config=config)
        details["viscosity_hypothesis"] = hyp.to_dict(details=False)
    margin = min_i - min_b
    if margin < -tol:
        u, rep = solve_poisson(space, dom, np.ones(space.n), np.zeros(space.n))
        v = u - float(np.nanmin(u[dom.closure_mask])) + 1.0
        M = float(v[B].max())
        eps_star = (min_b - min_i) / M
        eps = 0.5 * eps_star
        fe = fv - eps * v
        xb = int(I[np.argmin(fe[I])])
        details.update({"eps_threshold": eps_star, "eps_used": eps, "touch_vertex": xb,
                        "interior_min_persists": bool(fe[I].min() < fe[B].min()),
                        "test_function_laplacian": eps, "v_boundary_max": M,
                        "solver_residual": rep.residual_norm})
    return Verdict("min_principle", True, margin, x0, tol, details)


# ---------------------------------------------------------------------------
# approximate maximum principle


@dataclass
class MaxPrincipleStep:
    n: int
    a_n: float
    y_n: int
    x_n: int
    laplacian_value: float
    gradient_value: float
    d2_laplacian: float
    walk_length: int


@dataclass
class MaxPrincipleReport:
    minimizer: int
    sequence: list
    bound_constant: float
    ls_constant: float
    gradient_envelope: list = field(default_factory=list)
    stalls: list = field(default_factory=list)
    hypothesis: dict | None = None

    def negative_parts(self) -> np.ndarray:
        return np.array([max(-s.laplacian_value, 0.0) for s in self.sequence])

    def decay_holds(self, tol: float = 1e-8) -> bool:
        a = np.array([s.a_n for s in self.sequence])
        return bool(np.all(self.negative_parts() <= self.bound_constant * a + tol))

    def gradient_nonincreasing(self, start: int = 3, tol: float = 1e-8) -> bool:
        g = [s.gradient_value for s in self.sequence if s.n > start]
        return all(b <= a + tol for a, b in zip(g, g[1:]))

    def to_dict(self) -> dict:
        return {"minimizer": self.minimizer, "bound_constant": self.bound_constant,
                "ls_constant": self.ls_constant, "stalls": self.stalls,
                "gradient_envelope": self.gradient_envelope, "hypothesis": self.hypothesis,
                "sequence": [vars(s) for s in self.sequence]}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "a_n", "laplacian", "gradient"])
            for s in self.sequence:
                w.writerow([s.n, repr(s.a_n), repr(s.laplacian_value), repr(s.gradient_value)])


def descent_walk(space: MMGraph, values, start: int, allowed: np.ndarray, max_steps: int | None = None):
    """Steepest descent over neighbours inside ``allowed``; ties go to the lowest id.

    Returns ``(vertex, steps, stalled)``; a walk stalls when it would leave ``allowed``.
    """
    W = space.adjacency
    x, steps = int(start), 0
    max_steps = space.n if max_steps is None else max_steps
    while steps < max_steps:
        nb = W.indices[W.indptr[x]:W.indptr[x + 1]]
        best = nb[np.lexsort((nb, values[nb]))[0]]
        if values[best] >= values[x]:
            return x, steps, False
        if not allowed[best]:
            return x, steps, True
        x, steps = int(best), steps + 1
    return x, steps, True


def _deepest_minimizer(space, dom, fv):
    """Interior minimizer farthest from where ``f`` rises (the middle of a plateau)."""
    I = dom.interior
    fmin = fv[I].min()
    flat = 1e-12 * (1.0 + abs(fmin))
    cand = I[fv[I] <= fmin + flat]
    if cand.size == 1:
        return int(cand[0])
    above = np.flatnonzero(dom.closure_mask & (fv > fmin + flat))
    outside = np.r_[above, dom.boundary]
    depth = space.distance_rows(cand)[:, outside].min(axis=1)
    return int(cand[np.lexsort((cand, -depth))[0]])


def approximate_max_principle(space: MMGraph, dom: DomainSpec, f, C: float, schedule=None,
                              check_hypothesis: bool = True, tol: float | None = None) -> MaxPrincipleReport:
    """Follow local minima of ``f + a_n d(., y_n)^2`` towards the minimizer of ``f``.

    The minimizer is the one deepest inside the set where ``f`` is minimal.
    ``y_n`` is the interior vertex whose distance to the minimizer is closest to
    ``1/(2n)``, kept near the segment from the minimizer to ``y_1``; ``x_n`` ends a
    descent walk from ``y_n``.  ``bound_constant`` is
    the largest ``Lap d(., y_n)^2 (x_n)``, for which ``Lap f(x_n) >= -C a_n`` holds
    at every discrete local minimum; ``ls_constant`` is the least-squares slope of
    ``[Lap f(x_n)]_-`` against ``a_n``.
    """
    fv = field_values(space, f)
    if not np.all(np.isfinite(fv[dom.closure_mask])):
        raise GeometryError("f must be defined on the domain closure")
    a = np.array([2.0 ** -n for n in range(1, 13)] if schedule is None else schedule, dtype=float)
    if a.size == 0 or np.any(a <= 0) or np.any(np.diff(a) >= 0):
        raise GeometryError("a_n must be positive and strictly decreasing")
    I, B = dom.interior, dom.boundary
    x = _deepest_minimizer(space, dom, fv)
    if B.size and fv[x] > fv[B].min():
        raise GeometryError("the minimum of f is attained on the boundary")
    hyp = None
    if check_hypothesis:
        eta = np.full(space.n, float(C))
        v = check_distributional_form(space, dom, fv, eta,
                                      tol=1e-10 * (1 + abs(C)) if tol is None else tol)
        hyp = v.to_dict(details=False)
        if not v.holds:
            raise GeometryError(f"hypothesis Lap f <= {C} fails (margin {v.worst_margin:.3e})")
    lap = laplacian(space, fv)
    grad = gradient_modulus(space, fv)
    dx = space.distances_from(x)
    steps, stalls = [], []
    anchor = d_anchor = None
    # only vertices whose one-ring stays in the closure can host x_n
    for n, an in enumerate(a, start=1):
        target = 1.0 / (2 * n)
        if anchor is None:
            y = int(I[np.lexsort((I, np.abs(dx[I] - target)))[0]])
            anchor, d_anchor = y, space.distances_from(y)
        else:
            # stay on the segment from x towards the first y so the x_n approach
            # the minimizer from one direction
            excess = dx[I] + d_anchor[I] - dx[anchor]
            y = int(I[np.lexsort((I, np.abs(dx[I] - target) + excess))[0]])
        dy = space.distances_from(y)
        fn = fv + an * dy ** 2
        xn, length, stalled = descent_walk(space, np.where(dom.closure_mask, fn, np.inf), y,
                                           dom.interior_mask)
        if stalled:
            stalls.append(n)
            continue
        d2lap = float(laplacian(space, dy ** 2, at=[xn])[xn])
        steps.append(MaxPrincipleStep(n, float(an), y, xn, float(lap[xn]), float(grad[xn]),
                                      d2lap, length))
    if not steps:
        raise GeometryError("no interior local minimum was located along the schedule")
    bound = max(0.0, max(s.d2_laplacian for s in steps))
    av = np.array([s.a_n for s in steps])
    neg = np.array([max(-s.laplacian_value, 0.0) for s in steps])
    ls = float(av @ neg / (av @ av))
    env = np.minimum.accumulate([s.gradient_value for s in steps]).tolist()
    return MaxPrincipleReport(x, steps, bound, ls, env, stalls, hyp)
