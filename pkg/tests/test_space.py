import json
import math

import numpy as np
import pytest

from lapbounds.space import (DomainSpec, MMGraph, SpaceError, ball, build_model_space, load_space,
                             metric, regular_domain, save_space)


@pytest.fixture(scope="module")
def interval():
    return build_model_space("interval", 101)


def test_interval_weights_and_measure(interval):
    assert interval.n == 101
    assert interval.mesh_scale == pytest.approx(0.01)
    np.testing.assert_allclose(interval.weights, 100.0)
    np.testing.assert_allclose(interval.measure[1:-1], 0.01)
    assert not interval.regular[0] and not interval.regular[-1]


def test_grid_layout():
    g = build_model_space("euclidean_grid", 51)
    assert g.n == 51 ** 2
    np.testing.assert_allclose(g.coords.min(axis=0), [-0.5, -0.5])
    np.testing.assert_allclose(g.coords[g.center], [0.0, 0.0])
    assert g.curvature == (0.0, 2.0)


def test_model_curvature_tags():
    assert build_model_space("sphere2", 16).curvature == (1.0, 2.0)
    assert build_model_space("hyperbolic_disc", 16).curvature == (-1.0, 2.0)


def test_metric_axioms(interval):
    assert metric(interval, 7, 7) == 0.0
    assert metric(interval, 0, 100) == pytest.approx(1.0, abs=1e-14)
    assert metric(interval, 3, 40) == metric(interval, 40, 3)


def test_sphere_antipodal_distance():
    s = build_model_space("sphere2", 64)
    th, ph = s.coords.T
    x = int(np.argmin(np.abs(th - math.pi / 2) + np.abs(ph)))
    y = s.nearest_vertex([math.pi - th[x], ph[x] + math.pi])
    assert abs(metric(s, x, y) - math.pi) <= s.mesh_scale


def test_hyperbolic_metric_from_origin():
    hd = build_model_space("hyperbolic_disc", 32)
    r = np.linalg.norm(hd.coords, axis=1)
    d = hd.distances_from(hd.center)
    np.testing.assert_allclose(d, 2 * np.arctanh(r), atol=1e-12)


def test_ball_on_interval(interval):
    dom = ball(interval, 50, 0.25)
    # open ball is 26..74; the outer ring of the ball forms the boundary layer
    np.testing.assert_array_equal(dom.boundary, [26, 74])
    np.testing.assert_array_equal(dom.interior, np.arange(27, 74))


def test_ball_covering_sphere_is_rejected():
    s = build_model_space("sphere2", 16)
    with pytest.raises(SpaceError, match="no boundary"):
        ball(s, s.center, 10.0)


def test_domain_must_separate(interval):
    with pytest.raises(SpaceError, match="separate"):
        DomainSpec(interval, [10, 11, 12], [9])
    with pytest.raises(SpaceError, match="overlap"):
        DomainSpec(interval, [10, 11], [11, 12, 9])


def test_regular_domain_interior_is_regular():
    hd = build_model_space("hyperbolic_disc", 24)
    dom = regular_domain(hd)
    assert hd.regular[dom.interior].all()
    assert dom.boundary.size > 0


def test_save_load_round_trip(tmp_path):
    s = build_model_space("interval", 11)
    save_space(s, tmp_path / "s.json")
    t = load_space(tmp_path / "s.json")
    for name in ("coords", "measure", "edges", "weights", "regular", "admissible"):
        np.testing.assert_array_equal(getattr(s, name), getattr(t, name))
    assert t.mesh_scale == s.mesh_scale and t.curvature == s.curvature
    np.testing.assert_array_equal(s.distance_table, t.distance_table)


def _doc(tmp_path):
    save_space(build_model_space("interval", 5), tmp_path / "s.json")
    return json.loads((tmp_path / "s.json").read_text())


def test_negative_measure_names_vertex(tmp_path):
    doc = _doc(tmp_path)
    doc["vertices"][3]["measure"] = -1.0
    (tmp_path / "bad.json").write_text(json.dumps(doc))
    with pytest.raises(SpaceError, match="vertex 3"):
        load_space(tmp_path / "bad.json")


def test_asymmetric_edges_rejected(tmp_path):
    doc = _doc(tmp_path)
    doc["edges"] = [e for e in doc["edges"] if not (e["u"] == 2 and e["v"] == 1)]
    (tmp_path / "bad.json").write_text(json.dumps(doc))
    with pytest.raises(SpaceError, match="symmetric"):
        load_space(tmp_path / "bad.json")


def test_disconnected_graph_rejected():
    with pytest.raises(SpaceError, match="connected"):
        MMGraph(np.zeros((4, 1)), np.ones(4), [(0, 1), (2, 3)], [1.0, 1.0], 1.0)


def test_explicit_metric_checked():
    D = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], dtype=float)
    with pytest.raises(SpaceError):
        MMGraph(np.zeros((3, 1)), np.ones(3), [(0, 1), (1, 2)], [1.0, 1.0], 1.0, metric_table=D)


def test_bad_resolution():
    with pytest.raises(SpaceError):
        build_model_space("euclidean_grid", 2)
    with pytest.raises(SpaceError, match="unknown"):
        build_model_space("torus", 10)
