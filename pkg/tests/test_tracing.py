import math

import numpy as np
import pytest
from numpy.polynomial import legendre

from slhweno.errors import GeometryDegeneracyError, TracingError
from slhweno.mesh import Grid
from slhweno.presets import swirl_velocity
from slhweno.tracing import (EDGE_FIT, GLL4, CubicEdge, VelocityField, fit_edges, fit_test_poly,
                             fit_test_polys, gll_points_4, lattice_coords, trace_feet, trace_lattice,
                             upstream_cell)

ROTATION = VelocityField.analytic(lambda x, y, t: -y, lambda x, y, t: x)


def test_gll_nodes_are_roots_of_the_defining_polynomial():
    # (1 - x^2) P3'(x)
    dP3 = legendre.legder([0, 0, 0, 1])
    for x in GLL4:
        assert abs((1 - x * x) * legendre.legval(x, dP3)) < 1e-15


def test_gll_points_of_unit_cell():
    g = Grid(0, 1, 0, 1, 1, 1)
    pts = gll_points_4(g, 0, 0)
    np.testing.assert_array_equal(pts[0, 0], [0.0, 0.0])
    np.testing.assert_allclose(pts[:, 0, 0] + pts[::-1, 0, 0], 1.0, atol=1e-15)


def test_lattice_shares_cell_nodes():
    g = Grid(-1, 2, 0, 1, 3, 2)
    xs = lattice_coords(3, -1.0, 1.0)
    assert xs.size == 10
    for i in range(3):
        np.testing.assert_allclose(xs[3 * i:3 * i + 4], gll_points_4(g, i, 0)[:, 0, 0], atol=1e-15)


def test_uniform_trace_is_a_straight_shift():
    x = np.array([0.1, 0.7])
    y = np.array([0.3, -2.0])
    fx, fy = trace_feet(x, y, VelocityField.uniform(0.5, -1.25), 1.0, 0.4)
    np.testing.assert_array_equal(fx, x - 0.5 * 0.4)
    np.testing.assert_array_equal(fy, y + 1.25 * 0.4)


def test_analytic_constant_field_through_rk4_is_exact():
    vf = VelocityField.analytic(lambda x, y, t: 0 * x + 2.0, lambda x, y, t: 0 * y - 1.0)
    fx, fy = trace_feet(np.array([1.0]), np.array([1.0]), vf, 0.0, 0.3, 3)
    np.testing.assert_allclose([fx[0], fy[0]], [0.4, 1.3], atol=1e-15)


def test_rotation_feet_follow_the_exact_rotation():
    rng = np.random.default_rng(3)
    x, y = rng.uniform(-1, 1, (2, 50))
    errs = []
    for dt in (0.2, 0.1):
        fx, fy = trace_feet(x, y, ROTATION, 0.0, dt)
        c, s = math.cos(dt), math.sin(dt)
        errs.append(np.hypot(fx - (c * x + s * y), fy - (-s * x + c * y)).max())
    # one RK4 step has local error O(dt^5)
    assert errs[0] < 1e-5
    assert math.log2(errs[0] / errs[1]) > 4.7


def test_swirl_tracing_converges_at_fourth_order():
    vf = swirl_velocity()
    rng = np.random.default_rng(0)
    x, y = rng.uniform(-math.pi, math.pi, (2, 30))
    rx, ry = trace_feet(x, y, vf, 0.6, 0.4, 100)
    errs = []
    for n in (2, 4, 8):
        fx, fy = trace_feet(x, y, vf, 0.6, 0.4, n)
        errs.append(np.hypot(fx - rx, fy - ry).max())
    orders = [math.log2(a / b) for a, b in zip(errs[:-1], errs[1:])]
    assert min(orders) > 3.6


def test_nonfinite_foot_names_the_point():
    vf = VelocityField.analytic(lambda x, y, t: np.where(x > 0.5, np.nan, 0.0), lambda x, y, t: 0 * y)
    with pytest.raises(TracingError, match=r"point \(1,\)"):
        trace_feet(np.array([0.1, 0.9]), np.array([0.0, 0.0]), vf, 0.0, 0.1)
    with pytest.raises(ValueError):
        trace_feet(np.zeros(1), np.zeros(1), ROTATION, 0.0, 0.0)


def test_periodic_lattice_seams_are_copied():
    g = Grid(0, 2 * math.pi, 0, 2 * math.pi, 4, 4, "periodic", "periodic")
    fx, fy = trace_lattice(g, ROTATION, 0.0, 0.1)
    np.testing.assert_array_equal(fx[-1], fx[0] + 2 * math.pi)
    np.testing.assert_array_equal(fy[:, -1], fy[:, 0] + 2 * math.pi)


def test_edge_fit_recovers_cubic_curve():
    rng = np.random.default_rng(5)
    cx, cy = rng.normal(size=(2, 4))
    pts = np.stack([np.polyval(cx, GLL4), np.polyval(cy, GLL4)], axis=-1)
    np.testing.assert_allclose(EDGE_FIT @ pts[:, 0], cx, atol=1e-12)
    np.testing.assert_allclose(EDGE_FIT @ pts[:, 1], cy, atol=1e-12)


def test_reversed_edge_runs_backwards():
    e = CubicEdge(np.array([1.0, -2.0, 0.5, 3.0]), np.array([0.0, 1.0, 1.0, -1.0]))
    xi = np.linspace(-1, 1, 7)
    np.testing.assert_allclose(np.stack(e.reversed()(xi)), np.stack(e(-xi)), atol=1e-15)


def test_straight_feet_give_affine_edges_with_exact_corners():
    g = Grid(0, 1, 0, 1, 1, 1)
    feet = gll_points_4(g, 0, 0) - np.array([0.3, 0.1])
    edges = fit_edges(feet)
    for e in edges:
        assert e.is_affine(1.0)
    np.testing.assert_allclose(edges[0](-1.0), feet[0, 0], atol=1e-15)
    np.testing.assert_allclose(edges[0](1.0), feet[3, 0], atol=1e-15)
    # corners shared by consecutive edges
    for a, b in zip(edges, edges[1:] + edges[:1]):
        np.testing.assert_allclose(a(1.0), b(-1.0), atol=1e-15)


def test_signed_area_of_shifted_and_rotated_cells():
    g = Grid(-1, 1, -1, 1, 4, 4)
    fx, fy = trace_lattice(g, VelocityField.uniform(0.2, 0.3), 0.0, 1.0)
    assert upstream_cell(fx, fy, 1, 2).signed_area() == pytest.approx(g.dx * g.dy, rel=1e-14)
    fx, fy = trace_lattice(g, ROTATION, 0.0, 0.3, 4)
    for i, j in ((0, 0), (2, 1)):
        assert upstream_cell(fx, fy, i, j).signed_area() == pytest.approx(g.dx * g.dy, rel=1e-6)


def test_test_poly_translation_is_exact():
    g = Grid(0, 1, 0, 1, 1, 1)
    pts = gll_points_4(g, 0, 0).reshape(-1, 2)
    a, b = 0.37, -0.21
    W = 1.5 * pts[:, 0] - 0.5 * pts[:, 1]
    tp = fit_test_poly(W, pts - [a, b], (g.dx, g.dy))
    x, y = np.random.default_rng(1).uniform(-1, 1, (2, 20))
    np.testing.assert_allclose(tp(x, y), 1.5 * (x + a) - 0.5 * (y + b), atol=1e-13)


def test_test_poly_of_constant_is_constant():
    feet = np.random.default_rng(2).uniform(0, 1, (16, 2))
    tp = fit_test_poly(np.ones(16), feet, (1.0, 1.0))
    np.testing.assert_allclose(tp.coef, np.eye(10)[0], atol=1e-12)


def test_test_poly_for_rotation_matches_rotated_function():
    g = Grid(-1, 1, -1, 1, 4, 4)
    dt = 0.25
    fx, fy = trace_lattice(g, ROTATION, 0.0, dt, 20)
    cell = upstream_cell(fx, fy, 2, 1)
    pts = gll_points_4(g, 2, 1).reshape(-1, 2)
    xc = g.x_centers()[2]
    tp = fit_test_poly((pts[:, 0] - xc) / g.dx, cell.feet.reshape(-1, 2), (g.dx, g.dy))
    # W = mu pulled back through the exact rotation by dt
    c, s = math.cos(dt), math.sin(dt)
    x, y = cell.feet.reshape(-1, 2).T
    exact = (c * x - s * y - xc) / g.dx
    np.testing.assert_allclose(tp(x, y), exact, atol=1e-9)


def test_least_squares_normal_equations_hold():
    rng = np.random.default_rng(9)
    feet = rng.uniform(0, 1, (16, 2))
    W = rng.normal(size=16)
    tp = fit_test_poly(W, feet, (1.0, 1.0))
    from slhweno.tracing import monomials
    M = monomials(feet[:, 0] - tp.center[0], feet[:, 1] - tp.center[1])
    grad = M.T @ (M @ tp.coef - W)
    assert np.abs(grad).max() < 1e-10 * np.abs(M.T @ W).max()


def test_degenerate_feet_are_rejected():
    feet = np.column_stack([np.linspace(0, 1, 16), np.zeros(16)])
    with pytest.raises(GeometryDegeneracyError):
        fit_test_poly(np.ones(16), feet, (1.0, 1.0))


def test_vectorized_fit_matches_single_cell_fit():
    g = Grid(-1, 1, -1, 1, 3, 3)
    fx, fy = trace_lattice(g, ROTATION, 0.0, 0.2, 2)
    centres, coef = fit_test_polys(fx, fy, g)
    cell = upstream_cell(fx, fy, 1, 2)
    pts = gll_points_4(g, 1, 2).reshape(-1, 2)
    W = (pts[:, 1] - g.y_centers()[2]) / g.dy
    tp = fit_test_poly(W, cell.feet.reshape(-1, 2), (g.dx, g.dy))
    np.testing.assert_allclose(centres[1, 2], tp.center, atol=1e-15)
    np.testing.assert_allclose(coef[1, 2, 1], tp.coef, atol=1e-12)
