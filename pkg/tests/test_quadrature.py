import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from decaf.errors import DomainError, UnsupportedOrder
from decaf.quadrature import LEBEDEV_COUNTS, composite_grid, grid_hash, laguerre_rule, lebedev_rule
from decaf.weights import BellWeight, LaplacianWeight


@pytest.mark.parametrize("n", range(2, 21))
def test_laguerre_matches_scipy(n):
    # independent oracle: scipy's generalized Gauss-Laguerre
    x, w = special.roots_genlaguerre(n, 2.0)
    rule = laguerre_rule(n)
    assert np.allclose(rule.nodes, x, rtol=1e-10)
    assert np.allclose(rule.weights, w, rtol=1e-8, atol=1e-300)


@pytest.mark.parametrize("n", range(2, 7))
def test_laguerre_exact_to_degree(n):
    rule = laguerre_rule(n)
    for k in range(2 * n):
        assert np.sum(rule.weights * rule.nodes**k) == pytest.approx(special.gamma(k + 3), rel=1e-10)
    # and not beyond
    k = 2 * n
    assert abs(np.sum(rule.weights * rule.nodes**k) / special.gamma(k + 3) - 1) > 1e-6


@pytest.mark.parametrize("bad", [0, 1, 21, 2.5, "3"])
def test_laguerre_rejects_orders(bad):
    with pytest.raises(UnsupportedOrder):
        laguerre_rule(bad)


@pytest.mark.parametrize("count", LEBEDEV_COUNTS)
def test_lebedev_structure(count):
    rule = lebedev_rule(count)
    assert rule.count == count
    assert np.allclose(np.linalg.norm(rule.nodes, axis=1), 1.0)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(rule.weights > 0)
    assert len(np.unique(np.round(rule.nodes, 10), axis=0)) == count


# polynomial degree each rule integrates exactly
LEBEDEV_DEGREE = {6: 3, 14: 5, 26: 7, 38: 9, 50: 11}


def sphere_average(a, b, c):
    """Exact mean of x^a y^b z^c over the unit sphere."""
    if a % 2 or b % 2 or c % 2:
        return 0.0
    g = special.gamma
    return g((a + 1) / 2) * g((b + 1) / 2) * g((c + 1) / 2) / (2 * math.pi * g((a + b + c + 3) / 2))


@pytest.mark.parametrize("count", LEBEDEV_COUNTS)
def test_lebedev_monomials(count):
    rule = lebedev_rule(count)
    x, y, z = rule.nodes.T
    deg = LEBEDEV_DEGREE[count]
    for a in range(deg + 1):
        for b in range(deg + 1 - a):
            for c in range(deg + 1 - a - b):
                got = np.sum(rule.weights * x**a * y**b * z**c)
                assert got == pytest.approx(sphere_average(a, b, c), abs=1e-12), (a, b, c)


def test_sphere_average_oracle():
    # spot check the closed form against numerical integration
    f = lambda t, p: (math.sin(t) * math.cos(p)) ** 2 * (math.sin(t) * math.sin(p)) ** 2 * math.sin(t)
    val, _ = integrate.dblquad(f, 0, 2 * math.pi, 0, math.pi)
    assert sphere_average(2, 2, 0) == pytest.approx(val / (4 * math.pi), rel=1e-9)
    assert sphere_average(2, 2, 0) == pytest.approx(1 / 15)


@pytest.mark.parametrize("bad", [0, 7, 110])
def test_lebedev_unsupported(bad):
    with pytest.raises(UnsupportedOrder):
        lebedev_rule(bad)


def test_composite_layout():
    grid = composite_grid(3, [14, 26, 38], 4.8, LaplacianWeight(1.0))
    assert len(grid) == 78
    assert np.bincount(grid.layer_index).tolist() == [14, 26, 38]
    r = np.linalg.norm(grid.nodes, axis=1)
    assert r.max() == pytest.approx(4.8)
    assert np.all(grid.weights > 0)
    assert [layer.radius for layer in grid.layers] == sorted(layer.radius for layer in grid.layers)


def test_composite_exact_with_matching_weight():
    # with w(r) = exp(-r / tau) the composite rule is a plain product rule
    tau_grid = composite_grid(4, [26, 26, 26, 26], 5.0, lambda r: np.ones_like(r))
    tau = tau_grid.scale
    grid = composite_grid(4, [26, 26, 26, 26], 5.0, lambda r: np.exp(-r / tau))
    for k in range(8):
        exact = 4 * math.pi * tau ** (k + 3) * special.gamma(k + 3)
        got = grid.integrate(lambda x: np.linalg.norm(x, axis=1) ** k)
        assert got == pytest.approx(exact, rel=1e-10)
    x2y2 = grid.integrate(lambda x: x[:, 0] ** 2 * x[:, 1] ** 2)
    assert x2y2 == pytest.approx(4 * math.pi * tau**7 * special.gamma(7) / 15, rel=1e-10)


def test_composite_against_quad():
    w = BellWeight(6, 4, 6.0)
    f = lambda r: np.exp(-0.5 * (r / 1.5) ** 2)
    grid = composite_grid(6, [50] * 6, 4.8, w)
    got = grid.integrate(lambda x: f(np.linalg.norm(x, axis=1)))
    ref, _ = integrate.quad(lambda r: 4 * math.pi * r * r * float(w(np.array(r))) * f(r), 0, 6.0)
    assert got == pytest.approx(ref, rel=0.1)


def test_scale_factor_flag():
    a = composite_grid(3, [14, 26, 38], 4.8, LaplacianWeight(1.0), keep_scale_factor=True)
    b = composite_grid(3, [14, 26, 38], 4.8, LaplacianWeight(1.0), keep_scale_factor=False)
    assert np.allclose(a.weights, b.weights * a.scale**3)
    assert a.identity != b.identity


def test_grid_identity_deterministic_and_immutable():
    a = composite_grid(3, [14, 26, 38], 4.8, LaplacianWeight(1.0))
    b = composite_grid(3, [14, 26, 38], 4.8, LaplacianWeight(1.0))
    c = composite_grid(3, [14, 26, 38], 4.7, LaplacianWeight(1.0))
    assert a.identity == b.identity == grid_hash(a.nodes, a.weights)
    assert a.identity != c.identity
    with pytest.raises(ValueError):
        a.nodes[0, 0] = 1.0


@pytest.mark.parametrize(
    "args", [(3, [14, 26], 4.8), (3, [14, 26, 38], 0.0), (3, [14, 26, 38], -1.0)]
)
def test_composite_validation(args):
    with pytest.raises(DomainError):
        composite_grid(*args, LaplacianWeight(1.0))


def test_weight_vanishing_on_node_rejected():
    with pytest.raises(DomainError):
        composite_grid(3, [14, 26, 38], 6.0, BellWeight(6, 4, 6.0))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 10.0), st.integers(2, 6))
def test_outer_shell_at_requested_radius(radius, n):
    grid = composite_grid(n, [14] * n, radius, LaplacianWeight(1.0))
    assert np.linalg.norm(grid.nodes, axis=1).max() == pytest.approx(radius, rel=1e-12)
