"""Discrete metric-measure spaces.

A space is a finite weighted graph: every vertex carries a positive measure
``m`` and coordinates, every edge a positive conductance ``w``.  The graph
Laplacian ``(1/m(x)) sum_y w_xy (f(y) - f(x))`` is the operator every other
module works with.  Built-in model spaces (interval, Euclidean grid, round
sphere, hyperbolic disc) come with closed-form geodesic distances and a
curvature tag ``(K, N)``.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, dijkstra

# dense all-pairs tables are kept only up to this many vertices
DENSE_METRIC_LIMIT = 4000


class SpaceError(ValueError):
    """Invalid space, domain, or query."""


# ---------------------------------------------------------------------------
# closed-form model metrics, elementwise over the last axis (broadcasting)

def _euclidean(a, b):
    diff = a - b
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _sphere(a, b):
    # haversine: accurate for small and moderate angles
    th1, ph1, th2, ph2 = a[..., 0], a[..., 1], b[..., 0], b[..., 1]
    s = (np.sin((th2 - th1) / 2) ** 2
         + np.sin(th1) * np.sin(th2) * np.sin((ph2 - ph1) / 2) ** 2)
    return 2 * np.arcsin(np.sqrt(np.clip(s, 0.0, 1.0)))


def _poincare(a, b):
    diff = a - b
    num = np.sum(diff * diff, axis=-1)
    den = (1 - np.sum(a * a, axis=-1)) * (1 - np.sum(b * b, axis=-1))
    return 2 * np.arcsinh(np.sqrt(num / den))


def model_distance_table(kind, a, b):
    """Closed-form distances between coordinate rows ``a`` and ``b``."""
    return MODEL_METRICS[kind](a[:, None, :], b[None, :, :])


MODEL_METRICS = {
    "interval": _euclidean,
    "euclidean_grid": _euclidean,
    "sphere2": _sphere,
    "hyperbolic_disc": _poincare,
}


@dataclass(eq=False)
class MMGraph:
    """Weighted graph with vertex measures; immutable after construction.

    Vertex ids are ``0..n-1``.  ``edges`` holds each undirected edge once
    with ``u < v``.  ``metric_table`` is an explicit dense distance table
    (loaded spaces); ``model`` names a built-in model whose closed-form
    metric is evaluated from ``coords``.  ``admissible`` marks vertices that
    may belong to a domain interior; ``regular`` marks vertices where the
    stencil is complete (the operator is a consistent discretization there).
    """

    coords: np.ndarray
    measure: np.ndarray
    edges: np.ndarray
    weights: np.ndarray
    mesh_scale: float
    curvature: tuple[float, float] | None = None
    metric_table: np.ndarray | None = None
    model: dict | None = None
    admissible: np.ndarray | None = None
    regular: np.ndarray | None = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    _rows: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.ndim == 1:
            self.coords = self.coords[:, None]
        self.measure = np.asarray(self.measure, dtype=float)
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=float)
        n = self.n
        if self.admissible is None:
            self.admissible = np.ones(n, dtype=bool)
        if self.regular is None:
            self.regular = np.ones(n, dtype=bool)
        self.admissible = np.asarray(self.admissible, dtype=bool)
        self.regular = np.asarray(self.regular, dtype=bool)
        if self.curvature is not None:
            self.curvature = (float(self.curvature[0]), float(self.curvature[1]))
        self.mesh_scale = float(self.mesh_scale)
        for arr in (self.coords, self.measure, self.edges, self.weights,
                    self.admissible, self.regular):
            arr.setflags(write=False)
        if self.metric_table is not None:
            self.metric_table = np.asarray(self.metric_table, dtype=float)
            self.metric_table.setflags(write=False)
        self.validate()

    # -- structure ---------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.measure)

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    @property
    def kind(self) -> str | None:
        return self.model["kind"] if self.model else None

    def validate(self, sample_triples: int = 2000, seed: int = 0):
        n = self.n
        if self.coords.shape[0] != n:
            raise SpaceError("coords and measure have different lengths")
        bad = np.flatnonzero(~(self.measure > 0) | ~np.isfinite(self.measure))
        if bad.size:
            raise SpaceError(f"vertex {int(bad[0])}: measure must be positive")
        if self.weights.shape[0] != self.edges.shape[0]:
            raise SpaceError("edges and weights have different lengths")
        if self.edges.size:
            if self.edges.min() < 0 or self.edges.max() >= n:
                raise SpaceError("edge references an unknown vertex")
            if np.any(self.edges[:, 0] == self.edges[:, 1]):
                raise SpaceError("self-loop in edge list")
            if np.any(self.edges[:, 0] > self.edges[:, 1]):
                raise SpaceError("edges must be stored with u < v")
            keys = self.edges[:, 0] * n + self.edges[:, 1]
            if np.unique(keys).size != keys.size:
                raise SpaceError("duplicate edge")
        bad = np.flatnonzero(~(self.weights > 0) | ~np.isfinite(self.weights))
        if bad.size:
            u, v = self.edges[bad[0]]
            raise SpaceError(f"edge ({u}, {v}): weight must be positive")
        if n > 1:
            ncomp, _ = connected_components(self.adjacency, directed=False)
            if ncomp != 1:
                raise SpaceError(f"graph is not connected ({ncomp} components)")
        if not self.mesh_scale > 0:
            raise SpaceError("mesh_scale must be positive")
        if self.curvature is not None and self.curvature[1] < 1:
            raise SpaceError("curvature tag requires N >= 1")
        if self.model is not None and self.model.get("kind") not in MODEL_METRICS:
            raise SpaceError(f"unknown model kind {self.model.get('kind')!r}")
        if self.metric_table is not None:
            _check_metric_table(self.metric_table, n, sample_triples, seed)
        for name in ("admissible", "regular"):
            if getattr(self, name).shape != (n,):
                raise SpaceError(f"{name} mask has wrong length")

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric conductance matrix ``W``."""
        u, v = self.edges[:, 0], self.edges[:, 1]
        W = sp.coo_matrix((np.r_[self.weights, self.weights], (np.r_[u, v], np.r_[v, u])),
                          shape=(self.n, self.n))
        return W.tocsr()

    @cached_property
    def degree(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    @cached_property
    def generator(self) -> sp.csr_matrix:
        """Measure-weighted graph Laplacian ``L = M^-1 (W - D)``."""
        A = self.adjacency - sp.diags(self.degree)
        return (sp.diags(1.0 / self.measure) @ A).tocsr()

    def neighbors(self, x: int) -> np.ndarray:
        W = self.adjacency
        return W.indices[W.indptr[x]:W.indptr[x + 1]]

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        u, v = self.edges[:, 0], self.edges[:, 1]
        if self.model is None and self.metric_table is None:
            return np.linalg.norm(self.coords[u] - self.coords[v], axis=1)
        if self.metric_table is not None:
            return self.metric_table[u, v]
        return MODEL_METRICS[self.kind](self.coords[u], self.coords[v])

    # -- metric --------------------------------------------------------------

    def check_vertex(self, x) -> int:
        xi = int(x)
        if xi != x or not 0 <= xi < self.n:
            raise SpaceError(f"unknown vertex id {x!r}")
        return xi

    @property
    def has_analytic_metric(self) -> bool:
        return self.metric_table is not None or self.model is not None

    def distances_from(self, x: int) -> np.ndarray:
        """Distances from ``x`` to every vertex (read-only row)."""
        x = self.check_vertex(x)
        if self.metric_table is not None:
            return self.metric_table[x]
        if self.n <= DENSE_METRIC_LIMIT:
            return self.distance_table[x]
        with self._lock:
            row = self._rows.get(x)
        if row is None:
            row = self._compute_rows(np.array([x]))[0]
            row.setflags(write=False)
            with self._lock:
                self._rows[x] = row
        return row

    def distance_rows(self, rows) -> np.ndarray:
        """Distance block ``d(rows, all)``; not cached for large spaces."""
        rows = np.asarray(rows, dtype=np.int64)
        if self.metric_table is not None:
            return self.metric_table[rows]
        if self.n <= DENSE_METRIC_LIMIT:
            return self.distance_table[rows]
        return self._compute_rows(rows)

    def _compute_rows(self, rows):
        if self.model is not None:
            return model_distance_table(self.kind, self.coords[rows], self.coords)
        return self.graph_distance_rows(rows)

    @cached_property
    def distance_table(self) -> np.ndarray:
        if self.n > DENSE_METRIC_LIMIT and self.metric_table is None:
            raise SpaceError(f"dense metric table refused for {self.n} vertices")
        if self.metric_table is not None:
            return self.metric_table
        tab = self._compute_rows(np.arange(self.n))
        if self.model is not None:
            tab = 0.5 * (tab + tab.T)
            np.fill_diagonal(tab, 0.0)
        tab.setflags(write=False)
        return tab

    def graph_distance_rows(self, rows) -> np.ndarray:
        """Shortest-path distances with edge lengths from the metric/coords."""
        u, v = self.edges[:, 0], self.edges[:, 1]
        G = sp.coo_matrix((np.r_[self.edge_lengths, self.edge_lengths],
                           (np.r_[u, v], np.r_[v, u])), shape=(self.n, self.n)).tocsr()
        return dijkstra(G, directed=False, indices=np.asarray(rows))

    def nearest_vertex(self, point) -> int:
        """Vertex whose coordinates are closest (in the chart) to ``point``."""
        point = np.asarray(point, dtype=float).reshape(1, -1)
        if self.kind in MODEL_METRICS and self.kind != "interval":
            d = model_distance_table(self.kind, point, self.coords)[0]
        else:
            d = np.linalg.norm(self.coords - point, axis=1)
        return int(np.argmin(d))

    @cached_property
    def center(self) -> int:
        """Reference vertex: model origin, else the vertex of minimal eccentricity proxy."""
        if self.kind == "interval":
            return self.nearest_vertex([self.model["params"]["length"] / 2])
        if self.kind == "euclidean_grid":
            return self.nearest_vertex(np.zeros(self.dim))
        if self.kind == "sphere2":
            return self.nearest_vertex([np.pi / 2, np.pi])
        if self.kind == "hyperbolic_disc":
            return self.nearest_vertex([0.0, 0.0])
        return self.nearest_vertex(self.coords.mean(axis=0))

    def coordinate_names(self) -> dict[str, np.ndarray]:
        """Named coordinate arrays exposed to expression fields."""
        c = self.coords
        if self.kind == "sphere2":
            th, ph = c[:, 0], c[:, 1]
            return {"theta": th, "phi": ph, "x": np.sin(th) * np.cos(ph),
                    "y": np.sin(th) * np.sin(ph), "z": np.cos(th)}
        if self.kind == "hyperbolic_disc":
            return {"x": c[:, 0], "y": c[:, 1], "r": _poincare(np.zeros(2), c)}
        names = ["x", "y", "z", "w"]
        return {names[i] if i < 4 else f"x{i}": c[:, i] for i in range(self.dim)}


def _check_metric_table(D, n, sample_triples, seed):
    if D.shape != (n, n):
        raise SpaceError(f"metric table must be {n}x{n}")
    if not np.all(np.isfinite(D)) or np.any(D < 0):
        raise SpaceError("metric table has negative or non-finite entries")
    if not np.allclose(D, D.T, rtol=0, atol=1e-12 * max(1.0, D.max())):
        raise SpaceError("metric table is not symmetric")
    if np.any(np.diag(D) != 0):
        raise SpaceError("metric table has nonzero diagonal")
    if n < 3:
        return
    rng = np.random.default_rng(seed)
    if n ** 3 <= sample_triples:
        i, j, k = np.meshgrid(*(np.arange(n),) * 3, indexing="ij")
        i, j, k = i.ravel(), j.ravel(), k.ravel()
    else:
        i, j, k = rng.integers(0, n, size=(3, sample_triples))
    slack = D[i, k] - D[i, j] - D[j, k]
    if np.any(slack > 1e-10 * max(1.0, D.max())):
        w = int(np.argmax(slack))
        raise SpaceError(f"metric violates triangle inequality at ({i[w]}, {j[w]}, {k[w]})")


def metric(space: MMGraph, x, y) -> float:
    """Distance between vertices ``x`` and ``y``."""
    y = space.check_vertex(y)
    return float(space.distances_from(x)[y])


# ---------------------------------------------------------------------------
# domains


@dataclass(eq=False)
class DomainSpec:
    """Interior vertex set with a one-layer vertex separator as boundary."""

    parent: MMGraph
    interior: np.ndarray
    boundary: np.ndarray

    def __post_init__(self):
        self.interior = np.unique(np.asarray(self.interior, dtype=np.int64))
        self.boundary = np.unique(np.asarray(self.boundary, dtype=np.int64))
        self.validate()

    def validate(self):
        n = self.parent.n
        for name, arr in (("interior", self.interior), ("boundary", self.boundary)):
            if arr.size and (arr.min() < 0 or arr.max() >= n):
                raise SpaceError(f"{name} references an unknown vertex")
        if self.interior.size == 0:
            raise SpaceError("domain interior is empty")
        if np.intersect1d(self.interior, self.boundary).size:
            raise SpaceError("interior and boundary overlap")
        bad = self.interior[~self.parent.admissible[self.interior]]
        if bad.size:
            raise SpaceError(f"vertex {int(bad[0])} is not admissible as an interior vertex")
        closure = self.closure_mask
        W = self.parent.adjacency[self.interior]
        leak = np.unique(W.indices[~closure[W.indices]])
        if leak.size:
            raise SpaceError(f"boundary does not separate the interior (edge to vertex {int(leak[0])})")

    @cached_property
    def interior_mask(self) -> np.ndarray:
        m = np.zeros(self.parent.n, dtype=bool)
        m[self.interior] = True
        return m

    @cached_property
    def closure_mask(self) -> np.ndarray:
        m = self.interior_mask.copy()
        m[self.boundary] = True
        return m

    @classmethod
    def from_interior(cls, space: MMGraph, interior) -> "DomainSpec":
        """Domain with the given interior and its vertex boundary ``N(I) \\ I``."""
        mask = np.zeros(space.n, dtype=bool)
        mask[np.asarray(interior, dtype=np.int64)] = True
        reach = (space.adjacency @ mask.astype(float)) > 0
        return cls(space, np.flatnonzero(mask), np.flatnonzero(reach & ~mask))

    def describe(self) -> str:
        return f"domain(|interior|={self.interior.size}, |boundary|={self.boundary.size})"


def ball(space: MMGraph, center, r: float) -> DomainSpec:
    """Open metric ball around ``center`` minus its graph-boundary layer."""
    if not r > 0:
        raise SpaceError("ball radius must be positive")
    center = space.check_vertex(center)
    d = space.distances_from(center)
    inside = d < r * (1 - 1e-12)
    if inside.all():
        raise SpaceError(f"ball of radius {r} covers the whole space: no boundary exists")
    # interior: vertices of the ball whose whole one-ring lies in the ball
    outside_nb = space.adjacency @ (~inside).astype(float)
    core = inside & (outside_nb == 0) & space.admissible
    if not core.any():
        raise SpaceError(f"ball of radius {r} around {center} has empty interior")
    dom_boundary = (space.adjacency @ core.astype(float) > 0) & ~core
    if not dom_boundary.any():
        raise SpaceError(f"ball of radius {r} covers the whole space: no boundary exists")
    return DomainSpec(space, np.flatnonzero(core), np.flatnonzero(dom_boundary))


def regular_domain(space: MMGraph) -> DomainSpec:
    """Largest natural domain: admissible regular vertices, separated by one layer."""
    return DomainSpec.from_interior(space, np.flatnonzero(space.regular & space.admissible))


# ---------------------------------------------------------------------------
# model spaces


def build_model_space(kind: str, resolution: int, **params) -> MMGraph:
    """Discretize a constant-curvature model space.

    ``interval`` (``length``), ``euclidean_grid`` (``side``, ``dim``),
    ``sphere2`` (``resolution`` longitude cells, even), ``hyperbolic_disc``
    (``radius`` in hyperbolic units, ``resolution`` cells across).
    """
    if int(resolution) != resolution or resolution < 3:
        raise SpaceError("resolution must be an integer >= 3")
    resolution = int(resolution)
    try:
        builder = _BUILDERS[kind]
    except KeyError:
        raise SpaceError(f"unknown model space {kind!r}") from None
    return builder(resolution, **params)


def _interval(n, length=1.0):
    if not length > 0:
        raise SpaceError("interval length must be positive")
    x = np.linspace(0.0, length, n)
    h = length / (n - 1)
    m = np.full(n, h)
    m[[0, -1]] = h / 2
    edges = np.c_[np.arange(n - 1), np.arange(1, n)]
    regular = np.ones(n, dtype=bool)
    regular[[0, -1]] = False
    return MMGraph(x[:, None], m, edges, np.full(n - 1, 1.0 / h), h, (0.0, 1.0),
                   model={"kind": "interval", "params": {"resolution": n, "length": float(length)}},
                   regular=regular)


def _grid(n, side=1.0, dim=2):
    if not side > 0:
        raise SpaceError("grid side must be positive")
    if dim not in (1, 2, 3):
        raise SpaceError("grid dimension must be 1, 2 or 3")
    h = side / (n - 1)
    axis = np.linspace(-side / 2, side / 2, n)
    mesh = np.meshgrid(*(axis,) * dim, indexing="ij")
    coords = np.stack([g.ravel() for g in mesh], axis=1)
    idx = np.arange(n ** dim).reshape((n,) * dim)
    # trapezoid measure: halve per coordinate lying on the rim
    on_rim = [(g == 0) | (g == n - 1) for g in np.meshgrid(*(np.arange(n),) * dim, indexing="ij")]
    m = np.full(idx.shape, h ** dim)
    for r in on_rim:
        m = np.where(r, m / 2, m)
    edges = []
    for ax in range(dim):
        a = np.take(idx, np.arange(n - 1), axis=ax).ravel()
        b = np.take(idx, np.arange(1, n), axis=ax).ravel()
        edges.append(np.c_[a, b])
    edges = np.concatenate(edges)
    regular = ~np.any(on_rim, axis=0).ravel()
    return MMGraph(coords, m.ravel(), edges, np.full(len(edges), h ** (dim - 2)), h,
                   (0.0, float(dim)),
                   model={"kind": "euclidean_grid",
                          "params": {"resolution": n, "side": float(side), "dim": dim}},
                   regular=regular)


def _sphere2(n):
    if n % 2 or n < 4:
        raise SpaceError("sphere2 resolution must be an even integer >= 4")
    nt, nphi = n // 2, n
    ht, hp = np.pi / nt, 2 * np.pi / nphi
    theta = ht * np.arange(1, nt)
    phi = hp * np.arange(nphi)
    T, P = np.meshgrid(theta, phi, indexing="ij")
    # vertex 0: north pole, then rows, last: south pole
    coords = np.r_[[[0.0, 0.0]], np.c_[T.ravel(), P.ravel()], [[np.pi, 0.0]]]
    rows = nt - 1
    idx = 1 + np.arange(rows * nphi).reshape(rows, nphi)
    south = rows * nphi + 1
    cap = 2 * np.pi * (1 - np.cos(ht / 2))
    m = np.r_[cap, (np.sin(T) * ht * hp).ravel(), cap]
    e_phi = np.c_[idx.ravel(), np.roll(idx, -1, axis=1).ravel()]
    w_phi = np.repeat(ht / (np.sin(theta) * hp), nphi)
    e_th = np.c_[idx[:-1].ravel(), idx[1:].ravel()]
    w_th = np.repeat(np.sin(theta[:-1] + ht / 2) * hp / ht, nphi)
    w_pole = np.sin(ht / 2) * hp / ht
    e_np = np.c_[np.zeros(nphi, dtype=int), idx[0]]
    e_sp = np.c_[idx[-1], np.full(nphi, south)]
    edges = np.r_[e_phi, e_th, e_np, e_sp]
    weights = np.r_[w_phi, w_th, np.full(2 * nphi, w_pole)]
    edges = np.sort(edges, axis=1)
    # polar caps (two latitude cells) are excluded from domain interiors
    polar = 2 * ht
    admissible = (coords[:, 0] > polar + 1e-12) & (coords[:, 0] < np.pi - polar - 1e-12)
    regular = np.ones(len(m), dtype=bool)
    regular[[0, south]] = False
    g = MMGraph(coords, m, edges, weights, 1.0, (1.0, 2.0),
                model={"kind": "sphere2", "params": {"resolution": n}},
                admissible=admissible, regular=regular)
    return _with_mesh_scale(g, float(g.edge_lengths.max()))


def _hyperbolic(n, radius=1.0):
    if not radius > 0:
        raise SpaceError("hyperbolic disc radius must be positive")
    rho = np.tanh(radius / 2)  # Euclidean radius in the Poincare model
    he = 2 * rho / n
    axis = np.linspace(-rho, rho, n + 1)
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    keep = X ** 2 + Y ** 2 <= rho ** 2 * (1 + 1e-12)
    idx = -np.ones(X.shape, dtype=np.int64)
    idx[keep] = np.arange(keep.sum())
    coords = np.c_[X[keep], Y[keep]]
    lam = 2 / (1 - (coords ** 2).sum(axis=1))
    # conformal metric lam^2 (dx^2 + dy^2): unit conductances, measure lam^2 he^2
    m = lam ** 2 * he ** 2
    edges = []
    for a, b in ((idx[:-1, :], idx[1:, :]), (idx[:, :-1], idx[:, 1:])):
        ok = (a >= 0) & (b >= 0)
        edges.append(np.c_[a[ok], b[ok]])
    edges = np.sort(np.concatenate(edges), axis=1)
    deg = np.bincount(edges.ravel(), minlength=len(m))
    g = MMGraph(coords, m, edges, np.ones(len(edges)), 1.0, (-1.0, 2.0),
                model={"kind": "hyperbolic_disc",
                       "params": {"resolution": n, "radius": float(radius)}},
                regular=deg == 4)
    return _with_mesh_scale(g, float(g.edge_lengths.max()))


def _with_mesh_scale(g: MMGraph, h: float) -> MMGraph:
    return MMGraph(g.coords, g.measure, g.edges, g.weights, h, g.curvature,
                   g.metric_table, g.model, g.admissible, g.regular)


_BUILDERS = {
    "interval": _interval,
    "euclidean_grid": _grid,
    "sphere2": _sphere2,
    "hyperbolic_disc": _hyperbolic,
}


# ---------------------------------------------------------------------------
# files


def save_space(space: MMGraph, path, include_metric: bool | None = None):
    """Write a space as JSON.  Dense metric tables are written for explicit
    tables, or on request; model spaces also record their model descriptor."""
    doc = {
        "vertices": [{"id": i, "coords": c.tolist(), "measure": float(m)}
                     for i, (c, m) in enumerate(zip(space.coords, space.measure))],
        "edges": [],
        "mesh_scale": space.mesh_scale,
    }
    for (u, v), w in zip(space.edges.tolist(), space.weights.tolist()):
        doc["edges"].append({"u": u, "v": v, "weight": w})
        doc["edges"].append({"u": v, "v": u, "weight": w})
    if space.curvature is not None:
        doc["curvature"] = {"K": space.curvature[0], "N": space.curvature[1]}
    if space.model is not None:
        doc["model"] = space.model
    if include_metric is None:
        include_metric = space.metric_table is not None
    if include_metric:
        doc["metric"] = np.asarray(space.distance_table).tolist()
    if not space.admissible.all():
        doc["admissible"] = space.admissible.tolist()
    if not space.regular.all():
        doc["regular"] = space.regular.tolist()
    Path(path).write_text(json.dumps(doc))


def load_space(path) -> MMGraph:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SpaceError(f"cannot read space file {path}: {exc}") from exc
    try:
        verts = sorted(doc["vertices"], key=lambda v: v["id"])
        ids = [int(v["id"]) for v in verts]
        if ids != list(range(len(ids))):
            raise SpaceError("vertex ids must be 0..n-1 without gaps")
        coords = np.array([v["coords"] for v in verts], dtype=float)
        measure = np.array([v["measure"] for v in verts], dtype=float)
        bad = np.flatnonzero(~(measure > 0))
        if bad.size:
            raise SpaceError(f"vertex {ids[bad[0]]}: measure must be positive "
                             f"(got {measure[bad[0]]})")
        directed = {}
        for e in doc["edges"]:
            key = (int(e["u"]), int(e["v"]))
            if key in directed and directed[key] != float(e["weight"]):
                raise SpaceError(f"edge {key} listed twice with different weights")
            directed[key] = float(e["weight"])
        for (u, v), w in directed.items():
            if directed.get((v, u)) != w:
                raise SpaceError(f"edge list is not symmetric at ({u}, {v})")
        und = sorted((u, v, w) for (u, v), w in directed.items() if u < v)
        edges = np.array([(u, v) for u, v, _ in und], dtype=np.int64).reshape(-1, 2)
        weights = np.array([w for _, _, w in und], dtype=float)
        curv = doc.get("curvature")
        curvature = (curv["K"], curv["N"]) if curv is not None else None
        table = np.array(doc["metric"], dtype=float) if "metric" in doc else None
        return MMGraph(coords, measure, edges, weights, doc["mesh_scale"], curvature,
                       metric_table=table, model=doc.get("model"),
                       admissible=doc.get("admissible"), regular=doc.get("regular"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SpaceError):
            raise
        raise SpaceError(f"malformed space file {path}: {exc!r}") from exc
