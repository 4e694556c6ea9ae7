import math

import numpy as np
import pytest

from slhweno import fields as fs
from slhweno.errors import ChargeNeutralityError
from slhweno.mesh import Grid, MomentField, project_initial
from slhweno.presets import KHI, get_preset, khi_initial, landau_initial

TWO_PI = 2 * math.pi


def _torus(n, m=None, lx=TWO_PI, ly=TWO_PI):
    return Grid(0.0, lx, 0.0, ly, n, m or n, "periodic", "periodic")


def _probe_points(grid, n=40, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(grid.x_lo, grid.x_hi, n), rng.uniform(grid.y_lo, grid.y_hi, n)


def test_landau_field_is_the_single_mode_inversion():
    p = get_preset("landau_strong")
    g = p.grid(32, 64)
    E = fs.vp_efield(project_initial(g, landau_initial))
    alpha, k = p.params["alpha"], p.params["k"]
    vmax = g.y_hi
    x = np.linspace(0, 4 * math.pi, 57)
    want = alpha / k * math.erf(vmax / math.sqrt(2)) * np.sin(k * x)
    np.testing.assert_allclose(E(x), want, atol=1e-10 * alpha)


def test_zero_charge_gives_zero_field():
    g = Grid(0, TWO_PI, -1, 1, 8, 4, "periodic", "zero_extension")
    E = fs.vp_efield(MomentField(g, np.ones((8, 4)), np.zeros((8, 4)), np.zeros((8, 4))))
    assert np.abs(E.coef).max() < 1e-15


def test_cos2x_charge():
    g = Grid(0, TWO_PI, -0.5, 0.5, 16, 1, "periodic", "zero_extension")
    mf = project_initial(g, lambda x, v: 1 + np.cos(2 * x) + 0 * v)
    E = fs.vp_efield(mf)
    x = np.linspace(0, TWO_PI, 33)
    np.testing.assert_allclose(E(x), 0.5 * np.sin(2 * x), atol=1e-12)


def test_explicit_background_must_neutralize():
    g = Grid(0, TWO_PI, -0.5, 0.5, 8, 1, "periodic", "zero_extension")
    mf = project_initial(g, lambda x, v: 1 + np.cos(x) + 0 * v)
    with pytest.raises(ChargeNeutralityError):
        fs.vp_efield(mf, rho0=0.5)


def test_guiding_center_single_mode():
    g = _torus(16)
    u, v = fs.gc_velocity(project_initial(g, lambda x, y: np.sin(y) + 0 * x))
    x, y = _probe_points(g)
    np.testing.assert_allclose(u(x, y), -np.cos(y), atol=1e-12)
    np.testing.assert_allclose(v(x, y), 0.0, atol=1e-12)


def test_guiding_center_two_mode_khi():
    k, eps = KHI["k"], KHI["eps"]
    g = _torus(32, 32, lx=4 * math.pi)
    u, v = fs.gc_velocity(project_initial(g, khi_initial))
    # rho = sin y + eps cos(k x): Phi = sin y + eps cos(k x) / k^2
    x, y = _probe_points(g, seed=1)
    np.testing.assert_allclose(u(x, y), -np.cos(y), atol=1e-12)
    np.testing.assert_allclose(v(x, y), -eps / k * np.sin(k * x), atol=1e-12)


def test_euler_single_mode():
    g = _torus(16)
    u, v = fs.euler_velocity(project_initial(g, lambda x, y: np.sin(x) + 0 * y))
    x, y = _probe_points(g, seed=2)
    np.testing.assert_allclose(u(x, y), 0.0, atol=1e-12)
    np.testing.assert_allclose(v(x, y), -np.cos(x), atol=1e-12)
    psi = fs.euler_streamfunction(project_initial(g, lambda x, y: np.sin(x) + 0 * y))
    np.testing.assert_allclose(psi(x, y), -np.sin(x), atol=1e-12)


def test_zero_vorticity_and_nonzero_mean():
    g = _torus(8)
    zero = MomentField(g, np.zeros((8, 8)), np.zeros((8, 8)), np.zeros((8, 8)))
    u, v = fs.euler_velocity(zero)
    assert np.abs(u.coef).max() == 0 and np.abs(v.coef).max() == 0
    with pytest.raises(ChargeNeutralityError):
        fs.euler_velocity(project_initial(g, lambda x, y: 1 + np.sin(x) + 0 * y))
    with pytest.raises(ValueError):
        fs.gc_velocity(project_initial(Grid(0, 1, 0, 1, 4, 4, "periodic", "zero_extension"), lambda x, y: 0 * x))


def _random_zero_mean(g, seed):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=g.shape)
    u -= u.mean()
    return MomentField(g, u, 0 * u, 0 * u)


def test_divergence_free_and_poisson_residual():
    g = _torus(16, 12)
    mf = _random_zero_mean(g, 3)
    u, v = fs.gc_velocity(mf)
    # exact up to the rounding of the wavenumber products
    assert np.abs(fs.divergence_coefficients(u, v)).max() <= 1e-15 * np.abs(u.coef).max()
    rho = fs.samples_2d(g, mf.ubar)
    assert fs.poisson_residual(rho, fs.gc_potential(mf)) < 1e-12
    u, v = fs.euler_velocity(mf)
    assert np.abs(fs.divergence_coefficients(u, v)).max() <= 1e-15 * np.abs(u.coef).max()


def test_coefficients_are_conjugate_symmetric():
    g = _torus(12, 10)
    c = fs.samples_2d(g, _random_zero_mean(g, 5).ubar).coef
    # centred layout: index n//2 is mode 0; the first row/column holds the zeroed Nyquist mode
    inner = c[1:, 1:]
    np.testing.assert_allclose(inner, np.conj(inner[::-1, ::-1]), atol=1e-15)


def test_nufft_matches_direct_summation():
    g = _torus(24, 20)
    u, v = fs.gc_velocity(_random_zero_mean(g, 6))
    x, y = _probe_points(g, 500, seed=7)
    x = x + 3 * TWO_PI  # exercise the periodic wrap
    scale = np.abs(u.coef).sum()
    assert np.abs(u(x, y) - u(x, y, direct=True)).max() < 1e-12 * scale
    a, b = u.evaluate_with(v, x, y)
    np.testing.assert_allclose(a, u(x, y), atol=1e-13 * scale)
    np.testing.assert_allclose(b, v(x, y), atol=1e-13 * scale)
    rng = np.random.default_rng(9)
    E = fs.SpectralField1D(rng.normal(size=24) + 1j * rng.normal(size=24), 0.0, TWO_PI)
    assert np.abs(E(x) - E(x, direct=True)).max() < 1e-12 * np.abs(E.coef).sum()


def test_cell_average_deconvolution_recovers_point_values():
    g = _torus(16)
    f = fs.samples_2d(g, project_initial(g, lambda x, y: np.cos(3 * x - 2 * y)).ubar)
    x, y = _probe_points(g, seed=8)
    np.testing.assert_allclose(f(x, y), np.cos(3 * x - 2 * y), atol=1e-12)
    raw = fs.samples_2d(g, project_initial(g, lambda x, y: np.cos(3 * x - 2 * y)).ubar, averages=False)
    assert np.abs(raw(x, y) - np.cos(3 * x - 2 * y)).max() > 1e-3


def test_vp_velocity_components():
    E = fs.SpectralField1D(np.array([0, 0.5j, 0, -0.5j]), 0.0, TWO_PI)  # modes -2..1: sin(x)
    vf = fs.vp_velocity(E, 2.0)
    x = np.array([0.3, 1.1])
    a, b = vf(x, np.array([0.5, -1.0]), 0.0)
    np.testing.assert_allclose(a, [1.0, -2.0])
    np.testing.assert_allclose(b, np.sin(x), atol=1e-15)
