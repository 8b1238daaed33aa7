"""Discrete calculus on an :class:`~lapbounds.space.MMGraph`.

Field-valued operations take plain arrays (or :class:`ScalarField`) and
return numpy arrays; vertices where a value is undefined hold NaN.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .space import DomainSpec, MMGraph, SpaceError


class FieldError(ValueError):
    pass


class SolverError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


@dataclass(eq=False)
class ScalarField:
    """Values on the vertices of ``parent``; ``mask`` is the definition set."""

    parent: MMGraph
    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.parent.n,):
            raise FieldError(f"field needs {self.parent.n} values, got {self.values.shape}")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
        defined = self.values if self.mask is None else self.values[self.mask]
        bad = np.flatnonzero(~np.isfinite(defined))
        if bad.size:
            where = bad[0] if self.mask is None else np.flatnonzero(self.mask)[bad[0]]
            raise FieldError(f"field value at vertex {int(where)} is not finite")

    @classmethod
    def on_domain(cls, dom: DomainSpec, values) -> "ScalarField":
        vals = np.full(dom.parent.n, np.nan)
        src = np.asarray(values, dtype=float)
        vals[dom.closure_mask] = src[dom.closure_mask] if src.shape == vals.shape else src
        return cls(dom.parent, vals, dom.closure_mask)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["vertex_id", "value"])
            for i in (np.flatnonzero(self.mask) if self.mask is not None else range(len(self.values))):
                w.writerow([int(i), repr(float(self.values[i]))])

    @classmethod
    def from_csv(cls, space: MMGraph, path) -> "ScalarField":
        vals = np.full(space.n, np.nan)
        seen = np.zeros(space.n, dtype=bool)
        try:
            with open(path, newline="") as fh:
                rows = list(csv.reader(fh))
        except OSError as exc:
            raise FieldError(f"cannot read field file {path}: {exc}") from exc
        if rows and rows[0] and rows[0][0].strip() == "vertex_id":
            rows = rows[1:]
        for lineno, row in enumerate(rows, start=2):
            if not row:
                continue
            try:
                i, v = int(row[0]), float(row[1])
            except (IndexError, ValueError):
                raise FieldError(f"{Path(path).name}:{lineno}: expected 'vertex_id,value'") from None
            i = space.check_vertex(i)
            vals[i], seen[i] = v, True
        return cls(space, vals, None if seen.all() else seen)


def field_values(space: MMGraph, f) -> np.ndarray:
    """Values of ``f`` as a float array over all vertices (NaN = undefined)."""
    if isinstance(f, ScalarField):
        if f.parent is not space:
            raise FieldError("field belongs to a different space")
        return f.values
    arr = np.asarray(f, dtype=float)
    if arr.ndim == 0:
        return np.full(space.n, float(arr))
    if arr.shape[0] != space.n:
        raise FieldError(f"field needs {space.n} values, got {arr.shape[0]}")
    return arr


def _evaluable(space, vals, at):
    defined = np.isfinite(vals)
    if vals.ndim > 1:
        defined = defined.all(axis=1)
    ok = defined & ((space.adjacency @ (~defined).astype(float)) == 0)
    if at is None:
        return ok
    at = np.atleast_1d(np.asarray(at, dtype=np.int64))
    bad = at[~ok[at]]
    if bad.size:
        raise FieldError(f"vertex {int(bad[0])} has neighbours outside the field's definition set")
    sel = np.zeros(space.n, dtype=bool)
    sel[at] = True
    return sel


def laplacian(space: MMGraph, f, at=None) -> np.ndarray:
    """``(1/m(x)) sum_y w_xy (f(y) - f(x))`` wherever the one-ring is defined."""
    vals = field_values(space, f)
    ok = _evaluable(space, vals, at)
    out = space.generator @ np.where(np.isfinite(vals), vals, 0.0)
    out[~ok] = np.nan
    return out


def dirichlet_form(space: MMGraph, f, g) -> float:
    """``E(f, g) = 1/2 sum_{x,y} w_xy (f(y)-f(x)) (g(y)-g(x))`` over ordered pairs."""
    fv, gv = field_values(space, f), field_values(space, g)
    if not (np.all(np.isfinite(fv)) and np.all(np.isfinite(gv))):
        raise FieldError("dirichlet_form needs fields defined on every vertex")
    u, v = space.edges[:, 0], space.edges[:, 1]
    return float(np.sum(space.weights * (fv[v] - fv[u]) * (gv[v] - gv[u])))


def gradient_modulus(space: MMGraph, f, at=None) -> np.ndarray:
    """Pointwise slope with ``sum_x m |grad f|^2 = E(f, f)``."""
    vals = field_values(space, f)
    ok = _evaluable(space, vals, at)
    safe = np.where(np.isfinite(vals), vals, 0.0)
    u, v = space.edges[:, 0], space.edges[:, 1]
    e = space.weights * (safe[v] - safe[u]) ** 2
    acc = np.bincount(u, e, minlength=space.n) + np.bincount(v, e, minlength=space.n)
    out = np.sqrt(acc / (2 * space.measure))
    out[~ok] = np.nan
    return out


# ---------------------------------------------------------------------------
# Poisson problems


@dataclass
class EnergyReport:
    energy: float
    linear_term: float
    residual_norm: float


def pcg(A, b, diag, tol=1e-10, maxiter=None):
    """Jacobi-preconditioned conjugate gradients, one independent run per column.

    Returns ``(x, relative_residuals)``; columns with ``b = 0`` return 0.
    """
    b = np.asarray(b, dtype=float)
    single = b.ndim == 1
    B = b[:, None] if single else b
    n, k = B.shape
    maxiter = 50 * n if maxiter is None else maxiter
    bnorm = np.linalg.norm(B, axis=0)
    X = np.zeros_like(B)
    R = B.copy()
    Z = R / diag[:, None]
    P = Z.copy()
    rz = np.einsum("ij,ij->j", R, Z)
    target = tol * bnorm
    for _ in range(maxiter):
        if np.all(np.linalg.norm(R, axis=0) <= target):
            break
        AP = A @ P
        pap = np.einsum("ij,ij->j", P, AP)
        alpha = np.divide(rz, pap, out=np.zeros(k), where=pap > 0)
        X += alpha * P
        R -= alpha * AP
        Z = R / diag[:, None]
        rz_new = np.einsum("ij,ij->j", R, Z)
        beta = np.divide(rz_new, rz, out=np.zeros(k), where=rz > 0)
        P = Z + beta * P
        rz = rz_new
    true_r = np.linalg.norm(B - A @ X, axis=0)
    rel = np.divide(true_r, bnorm, out=np.zeros(k), where=bnorm > 0)
    return (X[:, 0], rel[0]) if single else (X, rel)


class PoissonSystem:
    """Reduced SPD system for ``Lap g = eta`` on ``dom.interior`` with ``g``
    prescribed on ``dom.boundary``; reusable across right-hand sides."""

    def __init__(self, space: MMGraph, dom: DomainSpec, tol: float = 1e-10):
        if dom.boundary.size == 0:
            raise SpaceError("Poisson problem needs a nonempty boundary")
        self.space, self.dom, self.tol = space, dom, tol
        W = space.adjacency
        I, Bd = dom.interior, dom.boundary
        self.diag = space.degree[I]
        self.A = (sp.diags(self.diag) - W[I][:, I]).tocsr()
        self.W_IB = W[I][:, Bd].tocsr()
        self.m_I = space.measure[I]

    def solve_interior(self, eta_I, g_B):
        """Interior values for (possibly column-stacked) data; raises on nonconvergence."""
        eta_I = np.asarray(eta_I, dtype=float)
        g_B = np.asarray(g_B, dtype=float)
        if eta_I.ndim == 2 and g_B.ndim == 1:
            g_B = np.repeat(g_B[:, None], eta_I.shape[1], axis=1)
        if g_B.ndim == 2 and eta_I.ndim == 1:
            eta_I = np.repeat(eta_I[:, None], g_B.shape[1], axis=1)
        m = self.m_I if eta_I.ndim == 1 else self.m_I[:, None]
        rhs = self.W_IB @ g_B - m * eta_I
        x, rel = pcg(self.A, rhs, self.diag, self.tol)
        worst = float(np.max(rel))
        if worst > self.tol:
            raise SolverError("conjugate gradients did not converge", worst)
        return x, worst


def solve_poisson(space: MMGraph, dom: DomainSpec, eta, boundary_data, tol: float = 1e-10):
    """Minimize ``g -> 1/2 E(g, g) + sum_I m g eta`` with ``g = boundary_data`` on the boundary.

    Returns ``(g, report)``; ``g`` is NaN off the domain closure.
    """
    eta = field_values(space, eta)
    bd = field_values(space, boundary_data)
    I, Bd = dom.interior, dom.boundary
    if not np.all(np.isfinite(eta[I])):
        raise FieldError("eta must be defined on the whole interior")
    if not np.all(np.isfinite(bd[Bd])):
        raise FieldError("boundary data must be defined on the whole boundary")
    system = PoissonSystem(space, dom, tol)
    gI, rel = system.solve_interior(eta[I], bd[Bd])
    g = np.full(space.n, np.nan)
    g[I], g[Bd] = gI, bd[Bd]
    return g, poisson_energy(space, dom, g, eta, rel)


def poisson_energy(space, dom, g, eta, residual=0.0) -> EnergyReport:
    u, v = space.edges[:, 0], space.edges[:, 1]
    touch = dom.interior_mask[u] | dom.interior_mask[v]
    gu, gv = g[u[touch]], g[v[touch]]
    quad = 0.5 * float(np.sum(space.weights[touch] * (gv - gu) ** 2))
    lin = float(np.sum(space.measure[dom.interior] * g[dom.interior] * eta[dom.interior]))
    return EnergyReport(quad + lin, lin, float(residual))


# ---------------------------------------------------------------------------


def lsc_envelope(space: MMGraph, f, r: float, chunk: int = 512) -> np.ndarray:
    """Minimum of ``f`` over the closed ball of radius ``r`` around each vertex."""
    if r < space.mesh_scale * (1 - 1e-12):
        raise FieldError(f"envelope radius {r} is below the mesh scale {space.mesh_scale}")
    vals = field_values(space, f)
    defined = np.isfinite(vals)
    src = np.where(defined, vals, np.inf)
    out = np.full(space.n, np.nan)
    rows = np.flatnonzero(defined)
    for s in range(0, rows.size, chunk):
        blk = rows[s:s + chunk]
        D = space.distance_rows(blk)
        out[blk] = np.min(np.where(D <= r * (1 + 1e-12), src[None, :], np.inf), axis=1)
    return out
