import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lapbounds.calculus import laplacian, solve_poisson
from lapbounds.expr import expression_values
from lapbounds.notions import (NOTIONS, AgreementMatrix, CheckConfig, NotionError, Verdict,
                               ball_subdomains, check_comparison, check_distributional_dual,
                               check_distributional_form, check_heatflow, check_viscosity,
                               equivalence_report, run_checker, verdict_from_dict)
from lapbounds.space import DomainSpec, ball, build_model_space, regular_domain
from lapbounds.suites import equivalence_suite

from _graphs import random_connected_graph


@pytest.fixture(scope="module")
def grid():
    return build_model_space("euclidean_grid", 31)


@pytest.fixture(scope="module")
def dom(grid):
    return regular_domain(grid)


@pytest.fixture(scope="module")
def half_r2(grid):
    return expression_values(grid, "(x^2+y^2)/2")


def test_dist_form_equality_case(grid, dom, half_r2):
    v = check_distributional_form(grid, dom, half_r2, 2.0)
    assert v.holds and abs(v.worst_margin) <= 1e-10


def test_dist_form_failure(grid, dom, half_r2):
    v = check_distributional_form(grid, dom, half_r2, 1.9)
    assert not v.holds
    assert v.worst_margin == pytest.approx(-0.1, abs=1e-9)
    assert v.witness in set(dom.interior.tolist())


@pytest.mark.parametrize("check", [check_distributional_form, check_distributional_dual,
                                   check_comparison, check_viscosity])
def test_constant_field_holds(grid, dom, check):
    v = check(grid, dom, np.full(grid.n, 1.25), 0.0)
    assert v.holds


def test_heatflow_constant(grid):
    dom = regular_domain(build_model_space("euclidean_grid", 51))
    space = dom.parent
    v = check_heatflow(space, dom, np.full(space.n, 1.0), 0.0)
    # the zero extension leaks through the 5 sqrt(t) collar at the 1e-5 level
    assert v.holds and abs(v.worst_margin) <= 1e-4


def test_dual_spike_fails_at_neighbours(grid, dom):
    f = np.zeros(grid.n)
    f[grid.center] = 1.0
    v = check_distributional_dual(grid, dom, f, 0.0)
    assert not v.holds
    assert v.witness in set(grid.neighbors(grid.center).tolist())


def test_form_and_dual_agree_exactly():
    rng = np.random.default_rng(5)
    g = random_connected_graph(rng, 40)
    dom = DomainSpec.from_interior(g, [0, 1, 2, 3, 4, 5])
    f, eta = rng.normal(size=(2, g.n))
    a = check_distributional_form(g, dom, f, eta)
    b = check_distributional_dual(g, dom, f, eta)
    assert a.worst_margin == pytest.approx(b.worst_margin, abs=1e-12)


def test_comparison_poisson_solution(grid):
    dom = ball(grid, grid.center, 0.3)
    eta = expression_values(grid, "1+x")
    f, _ = solve_poisson(grid, dom, eta, expression_values(grid, "y^2"))
    v = check_comparison(grid, dom, f, eta)
    assert v.holds and v.worst_margin >= -1e-7


def test_comparison_equality_case(grid, dom, half_r2):
    v = check_comparison(grid, dom, half_r2, 2.0)
    assert v.holds and abs(v.worst_margin) <= 1e-7


def test_comparison_local_counterexample(grid, dom, half_r2):
    h = grid.mesh_scale
    x0 = grid.center
    f = half_r2.copy()
    f[x0] -= 0.2 * h ** 2 / 4  # raises Lap f(x0) to 2.2
    assert laplacian(grid, f)[x0] == pytest.approx(2.2)
    for mult in (3, 6, 12):
        sub = ball(grid, x0, mult * h)
        g, _ = solve_poisson(grid, sub, 2.0, f)
        assert (g - f)[sub.interior].max() > 0
    v = check_comparison(grid, dom, f, 2.0)
    assert not v.holds


def test_viscosity_smooth_strict(grid, dom):
    f = expression_values(grid, "sin(x)*cos(2*y)")
    lap = laplacian(grid, f)
    delta = 0.3
    eta = np.where(np.isfinite(lap), lap, 0.0) + delta
    v = check_viscosity(grid, dom, f, eta)
    assert v.holds and v.worst_margin >= delta - 10 * grid.mesh_scale ** 2


def test_viscosity_equality_case(grid, dom, half_r2):
    v = check_viscosity(grid, dom, half_r2, 2.0)
    assert v.holds and abs(v.worst_margin) <= 1e-6


def test_viscosity_strict_minimum(grid, dom):
    f = expression_values(grid, "x^2+y^2")
    v = check_viscosity(grid, dom, f, -1.0)
    assert not v.holds and v.worst_margin <= -1.0 + 1e-9


def test_heatflow_quadratic():
    space = build_model_space("euclidean_grid", 51)
    dom = regular_domain(space)
    f = expression_values(space, "(x^2+y^2)/2")
    assert check_heatflow(space, dom, f, 2.0).holds
    bad = check_heatflow(space, dom, f, 1.5)
    assert not bad.holds and bad.worst_margin == pytest.approx(-0.5, abs=bad.tolerance_used)


def test_heatflow_poisson_solution():
    space = build_model_space("euclidean_grid", 51)
    dom = ball(space, space.center, 0.45)
    eta = expression_values(space, "1+x*y")
    f, _ = solve_poisson(space, dom, eta, 0.0)
    v = check_heatflow(space, dom, f, eta)
    assert v.holds
    assert v.worst_margin >= -(2 * v.details["max_fit_residual"] + 8 * space.mesh_scale ** 2)


def test_heatflow_collar_error(grid):
    dom = ball(grid, grid.center, 0.1)
    with pytest.raises(NotionError, match="collar"):
        check_heatflow(grid, dom, np.zeros(grid.n), 0.0)


def test_heatflow_rejects_unknown_extension(grid, dom):
    with pytest.raises(NotionError, match="extension"):
        check_heatflow(grid, dom, np.zeros(grid.n), 0.0, config=CheckConfig(extension="mirror"))


def test_ball_subdomains_stay_inside(grid, dom):
    subs = ball_subdomains(grid, dom)
    assert subs
    for s in subs:
        assert dom.closure_mask[s.dom.boundary].all()
        assert dom.interior_mask[s.dom.interior].all()


def test_tolerance_override(grid, dom, half_r2):
    v = check_distributional_form(grid, dom, half_r2, 1.9, config=CheckConfig(tol=0.2))
    assert v.holds and v.tolerance_used == 0.2
    assert CheckConfig().tolerance(grid) == pytest.approx(8 * grid.mesh_scale ** 2)


def test_verdict_holds_is_derived():
    assert Verdict("x", False, -0.1, 0, 0.2).holds
    assert not Verdict("x", True, -0.3, 0, 0.2).holds


def test_matrix_json_round_trip(grid, dom, half_r2):
    m = equivalence_report(grid, dom, half_r2, 2.5, notions=NOTIONS[:4])
    d = json.loads(m.to_json())
    again = AgreementMatrix([verdict_from_dict(v) for v in d["verdicts"]])
    assert again.consistent == m.consistent
    assert [v.worst_margin for v in again.verdicts] == pytest.approx([v.worst_margin for v in m.verdicts])


def test_disagreements_reported():
    m = AgreementMatrix([Verdict("a", True, 1, 0, 0), Verdict("b", True, -1, 0, 0)])
    assert not m.consistent and m.disagreements == [("a", "b")]
    assert m["b"].worst_margin == -1


def test_run_checker_unknown(grid, dom):
    with pytest.raises(NotionError):
        run_checker("magic", grid, dom, np.zeros(grid.n), 0.0)


@pytest.mark.parametrize("slack", [0.5, -0.5])
def test_small_equivalence_suite(slack):
    space = build_model_space("euclidean_grid", 51)
    for m in equivalence_suite(space, 3, slack, seed=11):
        assert m.consistent
        assert all(v.holds == (slack > 0) for v in m.verdicts)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 2.0))
def test_verdicts_monotone_in_eta(seed, bump):
    # raising eta never turns a passing verdict into a failing one
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, 14)
    dom = DomainSpec.from_interior(g, rng.choice(g.n, 4, replace=False))
    f, eta = rng.normal(size=(2, g.n))
    for check in (check_distributional_form, check_distributional_dual, check_comparison,
                  check_viscosity):
        lo = check(g, dom, f, eta, tol=0.0)
        hi = check(g, dom, f, eta + bump, tol=0.0)
        assert hi.worst_margin >= lo.worst_margin - 1e-8


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(-5, 5))
def test_verdicts_shift_invariant(seed, c):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, 12)
    dom = DomainSpec.from_interior(g, rng.choice(g.n, 3, replace=False))
    f, eta = rng.normal(size=(2, g.n))
    for check in (check_distributional_form, check_comparison):
        a = check(g, dom, f, eta, tol=0.0)
        b = check(g, dom, f + c, eta, tol=0.0)
        assert a.worst_margin == pytest.approx(b.worst_margin, abs=1e-7)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_comparison_complete_on_small_graphs(seed):
    # with every connected interior subset sampled, comparison and the
    # distributional form must agree on graphs with at most 12 vertices
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 13))
    g = random_connected_graph(rng, n)
    interior = rng.choice(n, int(rng.integers(1, n)), replace=False)
    dom = DomainSpec.from_interior(g, interior)
    f = rng.normal(size=n)
    eta = np.nan_to_num(laplacian(g, f)) + rng.normal(scale=0.3, size=n)
    a = check_distributional_form(g, dom, f, eta, tol=1e-9)
    b = check_comparison(g, dom, f, eta, tol=1e-9, subdomains=[])
    assert a.holds == b.holds
