"""Heat semigroup, small-time derivative estimates, and the Hopf-Lax semigroup."""

from __future__ import annotations

import math
import threading
import weakref
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .calculus import field_values
from .space import MMGraph, SpaceError

EIGEN_LIMIT = 3000

# c_eff defaults per model space: the lower end of the time window in units of h^2
DEFAULT_C_EFF = {"sphere2": 0.5, "hyperbolic_disc": 2.0}
C_EFF = 4.0

# first-order budget kappa*h for the Hopf-Lax stability margin: the minimizer map
# lives on vertices, so d(x, F_t x) and the point where f's Laplacian is read
# carry an O(h) quantization error (values from the refinement tables)
STABILITY_KAPPA = {"euclidean_grid": 2.0, "sphere2": 6.0, "hyperbolic_disc": 1.0}


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class TimeSchedule:
    """Decreasing sample times for the ``t -> 0`` difference quotients."""

    t_values: tuple
    c_eff: float = C_EFF

    def __post_init__(self):
        ts = tuple(sorted((float(t) for t in self.t_values), reverse=True))
        if len(ts) < 4:
            raise ScheduleError("a schedule needs at least 4 time values")
        if ts[-1] <= 0:
            raise ScheduleError("schedule times must be positive")
        if len(set(ts)) != len(ts):
            raise ScheduleError("schedule times must be distinct")
        object.__setattr__(self, "t_values", ts)

    @property
    def window(self) -> tuple[float, float]:
        return self.t_values[-1], self.t_values[0]

    @classmethod
    def for_space(cls, space: MMGraph, c_eff: float | None = None, span: float = 2.0,
                  count: int = 5) -> "TimeSchedule":
        if c_eff is None:
            c_eff = DEFAULT_C_EFF.get(space.kind, C_EFF)
        t_min = c_eff * space.mesh_scale ** 2
        return cls(tuple(np.geomspace(t_min * span, t_min, count)), c_eff)

    def validate(self, space: MMGraph):
        t_min = self.window[0]
        floor = self.c_eff * space.mesh_scale ** 2
        if t_min < floor * (1 - 1e-9):
            raise ScheduleError(f"t_min={t_min:.3e} is below c_eff*h^2={floor:.3e}")


# ---------------------------------------------------------------------------
# heat semigroup

_cache: "weakref.WeakKeyDictionary[MMGraph, object]" = weakref.WeakKeyDictionary()
_cache_lock = threading.Lock()


class _EigenHeat:
    """exp(tL) through the eigendecomposition of the symmetrized generator."""

    def __init__(self, space):
        s = np.sqrt(space.measure)
        A = (space.adjacency - sp.diags(space.degree)).toarray()
        S = A / s[:, None] / s[None, :]
        self.lam, self.U = np.linalg.eigh(0.5 * (S + S.T))
        self.lam = np.minimum(self.lam, 0.0)
        self.s = s

    def apply(self, f, t, steps=None):
        sf = self.s[:, None] * f if f.ndim == 2 else self.s * f
        coef = self.U.T @ sf
        decay = np.exp(t * self.lam)
        coef = coef * (decay[:, None] if f.ndim == 2 else decay)
        out = self.U @ coef
        return out / (self.s[:, None] if f.ndim == 2 else self.s)


# Euler substep in units of h^2.  The resolvent tails decay only like
# (tau/h^2)^hops, so rim effects leak into deep quotients unless tau << h^2.
EULER_SUBSTEP = 1.0 / 16


class _EulerHeat:
    """Implicit Euler substepping ``(M - tau A)^-k M`` with ``tau <= h^2/16``."""

    def __init__(self, space):
        self.M = sp.diags(space.measure)
        self.A = (space.adjacency - sp.diags(space.degree)).tocsc()
        self.m = space.measure
        self.max_tau = space.mesh_scale ** 2 * EULER_SUBSTEP
        self._lu = {}
        self._lock = threading.Lock()

    def steps_for(self, t):
        return max(1, math.ceil(t / self.max_tau * (1 - 1e-12)))

    def _factor(self, tau):
        key = float(tau)
        with self._lock:
            lu = self._lu.get(key)
            if lu is None:
                if len(self._lu) > 16:
                    self._lu.clear()
                lu = splu((self.M - tau * self.A).tocsc())
                self._lu[key] = lu
        return lu

    def apply(self, f, t, steps=None):
        k = self.steps_for(t) if steps is None else max(int(steps), self.steps_for(t))
        lu = self._factor(t / k)
        x = np.array(f, dtype=float)
        m = self.m[:, None] if x.ndim == 2 else self.m
        for _ in range(k):
            x = lu.solve(m * x)
        return x


def _heat_engine(space, method=None):
    method = method or ("eigen" if space.n <= EIGEN_LIMIT else "euler")
    with _cache_lock:
        engines = _cache.setdefault(space, {})
        eng = engines.get(method)
    if eng is None:
        eng = _EigenHeat(space) if method == "eigen" else _EulerHeat(space)
        with _cache_lock:
            engines.setdefault(method, eng)
            eng = engines[method]
    return eng


def heat_apply(space: MMGraph, f, t: float, method: str | None = None, steps: int | None = None):
    """``P_t f = exp(t L) f``; ``f`` may be a vector or a column stack."""
    if t < 0:
        raise ValueError("heat time must be nonnegative")
    f = np.asarray(f, dtype=float) if np.ndim(f) == 2 else field_values(space, f)
    if not np.all(np.isfinite(f)):
        raise ValueError("heat_apply needs a field defined on every vertex")
    if t == 0:
        return np.array(f, dtype=float)
    return _heat_engine(space, method).apply(f, t, steps)


# ---------------------------------------------------------------------------
# small-time derivative


@dataclass
class DerivativeEstimate:
    value: float
    samples: list
    fit_residual: float
    max_quotient: float = field(default=float("nan"))

    @property
    def upper(self) -> float:
        """Safe-side surrogate of the one-sided limsup."""
        return self.value + self.fit_residual


def heat_quotients(space: MMGraph, f, sched: TimeSchedule, method=None):
    """Difference quotients ``(P_t f - f)/t``, one row per schedule time."""
    sched.validate(space)
    f = np.asarray(f, dtype=float) if np.ndim(f) == 2 else field_values(space, f)
    eng = _heat_engine(space, method)
    steps = eng.steps_for(sched.window[1]) if isinstance(eng, _EulerHeat) else None
    ts = np.array(sched.t_values)
    Q = np.stack([(eng.apply(f, t, steps) - f) / t for t in ts])
    return ts, Q


def affine_extrapolation(ts, Q):
    """Least-squares line through ``(t, Q[:, j])``; intercepts and max residuals.

    Extra trailing axes of ``Q`` are fitted independently.
    """
    shape = Q.shape[1:]
    Q2 = Q.reshape(len(ts), -1)
    V = np.c_[np.ones_like(ts), ts]
    coef, *_ = np.linalg.lstsq(V, Q2, rcond=None)
    resid = np.max(np.abs(Q2 - V @ coef), axis=0)
    return coef[0].reshape(shape), resid.reshape(shape)


def heat_derivative_field(space: MMGraph, f, sched: TimeSchedule, method=None):
    """Vectorized estimates at every vertex: ``(value, fit_residual, max_quotient)``.

    ``f`` may be a column stack of fields.
    """
    ts, Q = heat_quotients(space, f, sched, method)
    value, resid = affine_extrapolation(ts, Q)
    return value, resid, Q.max(axis=0)


def heat_derivative_estimate(space: MMGraph, f, x, sched: TimeSchedule, method=None):
    x = space.check_vertex(x)
    ts, Q = heat_quotients(space, f, sched, method)
    value, resid = affine_extrapolation(ts, Q[:, [x]])
    return DerivativeEstimate(float(value[0]), list(zip(ts.tolist(), Q[:, x].tolist())),
                              float(resid[0]), float(Q[:, x].max()))


# ---------------------------------------------------------------------------
# Hopf-Lax


@dataclass
class TransportMap:
    t: float
    F: np.ndarray
    gap: np.ndarray
    distance: np.ndarray


def hopf_lax(space: MMGraph, f, t: float, chunk: int = 256):
    """``Q_t f(x) = min_y f(y) + d(x, y)^2 / (2t)`` by exhaustive minimization.

    Ties go to the minimizer closest to ``x``, then to the lowest vertex id.
    """
    if not t > 0:
        raise ValueError("Hopf-Lax time must be positive")
    f = field_values(space, f)
    if not np.all(np.isfinite(f)):
        raise ValueError("hopf_lax needs a field defined on every vertex")
    n = space.n
    Q = np.empty(n)
    F = np.empty(n, dtype=np.int64)
    gap = np.empty(n)
    dist = np.empty(n)
    scale = 1e-13 * (1 + np.max(np.abs(f)))
    for s in range(0, n, chunk):
        rows = np.arange(s, min(n, s + chunk))
        D = space.distance_rows(rows)
        V = f[None, :] + D ** 2 / (2 * t)
        best = V.min(axis=1)
        cand = V <= best[:, None] + scale
        dkey = np.where(cand, D, np.inf)
        cand &= dkey == dkey.min(axis=1)[:, None]
        Fi = np.argmax(cand, axis=1)
        r = np.arange(len(rows))
        Q[rows] = V[r, Fi]
        F[rows] = Fi
        dist[rows] = D[r, Fi]
        V[r, Fi] = np.inf
        gap[rows] = V.min(axis=1) - Q[rows] if n > 1 else np.inf
    return Q, TransportMap(float(t), F, gap, dist)


def _curvature_K(space, K):
    if K is not None:
        return float(K)
    if space.curvature is None:
        raise SpaceError("space has no curvature tag")
    return space.curvature[0]


def hopflax_regularized_bound(space: MMGraph, f, eta, t: float, K: float | None = None,
                              transport: TransportMap | None = None):
    """``eta_t(x) = eta(F_t(x)) - K d(x, F_t(x))^2 / t``."""
    K = _curvature_K(space, K)
    if transport is None:
        _, transport = hopf_lax(space, f, t)
    eta = field_values(space, eta)
    return eta[transport.F] - K * transport.distance ** 2 / t


def stability_check(space: MMGraph, f, t: float, x, sched: TimeSchedule):
    """Compare the heat derivative of ``Q_t f`` at ``x`` with that of ``f`` at ``F_t(x)``.

    Returns ``(lhs, rhs, margin)`` with ``margin = rhs - lhs.value``.
    """
    K = _curvature_K(space, None)
    x = space.check_vertex(x)
    Qf, T = hopf_lax(space, f, t)
    lhs = heat_derivative_estimate(space, Qf, x, sched)
    y = int(T.F[x])
    est = heat_derivative_estimate(space, f, y, sched)
    rhs = est.value - K * T.distance[x] ** 2 / t
    return lhs, rhs, rhs - lhs.value


def stability_margins(space: MMGraph, f, t: float, sched: TimeSchedule):
    """Vectorized :func:`stability_check` over all vertices.

    Returns ``(margin, transport, residual)`` where ``residual`` adds the fit
    residuals of both estimates.
    """
    K = _curvature_K(space, None)
    Qf, T = hopf_lax(space, f, t)
    lv, lr, _ = heat_derivative_field(space, Qf, sched)
    fv, fr, _ = heat_derivative_field(space, f, sched)
    rhs = fv[T.F] - K * T.distance ** 2 / t
    return rhs - lv, T, lr + fr[T.F]


def stability_tolerance(space: MMGraph, residual=0.0, kappa: float | None = None):
    """Error budget ``kappa*h + residual`` for :func:`stability_check` margins."""
    kappa = STABILITY_KAPPA.get(space.kind, 4.0) if kappa is None else kappa
    return kappa * space.mesh_scale + residual
