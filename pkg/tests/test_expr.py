import numpy as np
import pytest

from lapbounds.expr import ExpressionError, expression_field, expression_values
from lapbounds.space import build_model_space


@pytest.fixture(scope="module")
def grid():
    return build_model_space("euclidean_grid", 21)


def test_zero(grid):
    np.testing.assert_array_equal(expression_values(grid, "0"), 0.0)


def test_matches_direct_construction(grid):
    x, y = grid.coords.T
    np.testing.assert_allclose(expression_values(grid, "x^2+y^2"), x ** 2 + y ** 2, atol=1e-15)


def test_distance_primitive(grid):
    d = grid.distances_from(0)
    np.testing.assert_allclose(expression_values(grid, "d(p0)^2/2"), d ** 2 / 2)
    np.testing.assert_allclose(expression_values(grid, "d(0)"), d)
    np.testing.assert_allclose(expression_values(grid, "d(center)"), grid.distances_from(grid.center))


def test_functions_and_constants(grid):
    x, y = grid.coords.T
    v = expression_values(grid, "max(x, y, 0) + min(x, -y) + abs(x)*cos(pi*y) + exp(-e)")
    np.testing.assert_allclose(v, np.maximum(np.maximum(x, y), 0) + np.minimum(x, -y)
                               + np.abs(x) * np.cos(np.pi * y) + np.exp(-np.e))


def test_sphere_names():
    s = build_model_space("sphere2", 16)
    th = s.coords[:, 0]
    np.testing.assert_allclose(expression_values(s, "z - cos(theta)"), 0.0, atol=1e-15)
    np.testing.assert_allclose(expression_values(s, "x^2+y^2+z^2"), 1.0)
    assert expression_field(s, "theta").values.tolist() == th.tolist()


@pytest.mark.parametrize("bad, msg", [
    ("", "empty"), ("x +", "parse"), ("q", "unknown name"), ("foo(x)", "unknown function"),
    ("__import__('os')", "unknown function"), ("x.real", "unsupported"), ("log(x-1)", "not finite"),
    ("d(x)", "vertex"), ("sin(x, y)", "one argument"), ("'a'", "literal"),
])
def test_rejections(grid, bad, msg):
    with pytest.raises(ExpressionError, match=msg):
        expression_values(grid, bad)
