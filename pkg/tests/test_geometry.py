import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lapbounds.calculus import solve_poisson
from lapbounds.expr import expression_values
from lapbounds.geometry import (ComparisonProfile, GeometryError, approximate_max_principle,
                                check_distance_comparison, descent_walk, distance_to_set,
                                minimum_principle_check, model_set, t_KN)
from lapbounds.space import DomainSpec, ball, build_model_space, regular_domain

from _graphs import random_connected_graph


@pytest.fixture(scope="module")
def grid():
    return build_model_space("euclidean_grid", 51)


def test_t_flat_is_zero():
    for N in (1, 2, 3.5):
        np.testing.assert_array_equal(t_KN(ComparisonProfile(0.0, N), np.linspace(-5, 5, 11)), 0.0)


def test_t_sphere_value():
    assert t_KN(ComparisonProfile(1.0, 2.0), math.pi / 4) == pytest.approx(-1.0, abs=1e-12)


def test_t_hyperbolic_odd_bounded():
    p = ComparisonProfile(-1.0, 2.0)
    x = np.linspace(-30, 30, 601)
    v = t_KN(p, x)
    assert t_KN(p, 0.0) == 0.0
    np.testing.assert_allclose(v, -t_KN(p, -x), atol=1e-12)
    assert np.all(np.abs(v) <= 1.0)


def test_t_sphere_diverges_at_domain_edge():
    p = ComparisonProfile(1.0, 3.0)
    lo, hi = p.domain
    assert hi == pytest.approx(math.pi / 2 * math.sqrt(2))
    assert t_KN(p, hi * (1 - 1e-9)) < -1e6
    with pytest.raises(GeometryError, match="outside"):
        t_KN(p, hi)


def test_t_rejects_degenerate_dimension():
    with pytest.raises(GeometryError, match="N = 1"):
        t_KN(ComparisonProfile(1.0, 1.0), 0.1)
    with pytest.raises(GeometryError):
        ComparisonProfile(0.0, 0.5)


def test_model_set_names(grid):
    assert model_set(grid).name == "half-plane"
    with pytest.raises(GeometryError, match="hemisphere"):
        model_set(grid, "hemisphere")


def test_vertex_set_distance_matches_closed_form(grid):
    ms = model_set(grid)
    d = distance_to_set(grid, np.flatnonzero(ms.members))
    np.testing.assert_allclose(d, ms.distance, atol=1e-12)


def test_half_plane_on_grid(grid):
    v = check_distance_comparison(grid, "half-plane")
    assert v.holds
    assert v.details["max_abs_error"] <= 0.02
    assert abs(v.worst_margin) <= 0.02


def test_hemisphere_equality_case():
    s = build_model_space("sphere2", 48)
    v = check_distance_comparison(s, "hemisphere")
    assert v.holds and v.details["max_abs_error"] <= 0.05
    assert v.details["d_range"][1] <= math.pi / 3 + 1e-9


def test_geodesic_half_plane_equality_case():
    hd = build_model_space("hyperbolic_disc", 48)
    v = check_distance_comparison(hd, "geodesic-half-plane")
    assert v.holds and v.details["max_abs_error"] <= 0.05


def test_localized_window(grid):
    v = check_distance_comparison(grid, "half-plane", window=(-0.2, 0.2))
    w = check_distance_comparison(grid, "half-plane")
    assert v.details["vertices"] < w.details["vertices"]


def test_min_principle_harmonic(grid):
    dom = ball(grid, grid.center, 0.3)
    rng = np.random.default_rng(2)
    f, _ = solve_poisson(grid, dom, 0.0, rng.normal(size=grid.n))
    v = minimum_principle_check(grid, dom, f)
    assert v.holds


def test_min_principle_squared_distance(grid):
    dom = ball(grid, grid.center, 0.3)
    f = expression_values(grid, "d(center)^2")
    v = minimum_principle_check(grid, dom, f)
    assert not v.holds and v.witness == grid.center
    d = v.details
    assert d["interior_min_persists"] and d["test_function_laplacian"] > 0
    assert 0 < d["eps_used"] < d["eps_threshold"]


def test_min_principle_constant(grid):
    dom = ball(grid, grid.center, 0.3)
    v = minimum_principle_check(grid, dom, np.full(grid.n, 3.0))
    assert v.holds and v.details["min_interior"] == v.details["min_boundary"]


def test_min_principle_with_viscosity_hypothesis(grid):
    dom = ball(grid, grid.center, 0.2)
    f = expression_values(grid, "d(center)^2")
    v = minimum_principle_check(grid, dom, f, verify_viscosity=True)
    assert not v.details["viscosity_hypothesis"]["holds"]


def test_max_principle_strict_minimum(grid):
    dom = regular_domain(grid)
    rep = approximate_max_principle(grid, dom, expression_values(grid, "d(center)^2"), 4.0)
    assert rep.minimizer == grid.center
    later = [s for s in rep.sequence if s.n >= 4]
    assert all(s.x_n == grid.center for s in later)
    assert all(s.laplacian_value == pytest.approx(4.0) for s in later)
    assert all(s.gradient_value <= 2 * grid.mesh_scale for s in later)
    assert rep.decay_holds() and rep.gradient_nonincreasing()


def test_max_principle_constant(grid):
    rep = approximate_max_principle(grid, regular_domain(grid), np.full(grid.n, 2.0), 0.0)
    assert all(s.laplacian_value == 0.0 and s.gradient_value == 0.0 for s in rep.sequence)
    assert rep.decay_holds()


def test_max_principle_plateau(grid):
    f = expression_values(grid, "max(d(center)-0.1, 0)^2 + 0.3*max(x-0.05, 0)^3")
    dom = regular_domain(grid)
    rep = approximate_max_principle(grid, dom, f, 10.0)
    assert rep.decay_holds() and rep.gradient_nonincreasing()
    assert rep.negative_parts().max() <= rep.bound_constant * rep.sequence[0].a_n + 1e-8


def test_max_principle_hypothesis_violation(grid):
    with pytest.raises(GeometryError, match="hypothesis"):
        approximate_max_principle(grid, regular_domain(grid), expression_values(grid, "x^2+y^2"), 1.0)


def test_max_principle_csv(tmp_path, grid):
    rep = approximate_max_principle(grid, regular_domain(grid), expression_values(grid, "d(center)^2"), 4.0)
    rep.to_csv(tmp_path / "seq.csv")
    lines = (tmp_path / "seq.csv").read_text().splitlines()
    assert lines[0] == "n,a_n,laplacian,gradient" and len(lines) == 13


def test_descent_walk_reaches_local_minimum():
    rng = np.random.default_rng(0)
    g = random_connected_graph(rng, 20)
    vals = rng.normal(size=g.n)
    x, _, stalled = descent_walk(g, vals, 0, np.ones(g.n, dtype=bool))
    assert not stalled
    assert all(vals[y] >= vals[x] for y in g.neighbors(x))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_min_principle_small_graphs(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 9))
    g = random_connected_graph(rng, n)
    interior = rng.choice(n, int(rng.integers(1, n)), replace=False)
    try:
        dom = DomainSpec.from_interior(g, interior)
    except Exception:
        return
    if dom.boundary.size == 0:
        return
    f, _ = solve_poisson(g, dom, 0.0, rng.normal(size=n))
    assert minimum_principle_check(g, dom, f, tol=1e-10).holds
