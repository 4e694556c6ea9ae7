"""Periodic spectral Poisson solves and the velocity fields of the nonlinear models.

Cell averages are deconvolved into point values of the trigonometric
interpolant (division by sinc(k h / 2) per axis). Fields are kept as Fourier
coefficient tables and evaluated at arbitrary points by a type-2
non-uniform FFT (direct summation when finufft is unavailable).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ChargeNeutralityError
from .mesh import Grid, MomentField
from .tracing import VelocityField

try:
    import finufft
except ImportError:  # pragma: no cover
    finufft = None

NUFFT_EPS = 1e-14


def _wavenumbers(n: int, length: float) -> np.ndarray:
    """Angular wavenumbers in increasing-mode order -n/2 .. n/2 - 1."""
    k = np.arange(n) - n // 2
    return 2 * np.pi * k / length


def _spectrum(samples: np.ndarray, axes, averages: bool = False) -> np.ndarray:
    """Centred Fourier coefficients with the Nyquist modes zeroed.

    With ``averages`` the input holds cell averages rather than point values.
    """
    c = np.fft.fftshift(np.fft.fftn(samples, axes=axes), axes=axes) / np.prod([samples.shape[a] for a in axes])
    for a in axes:
        n = samples.shape[a]
        shape = [1] * c.ndim
        shape[a] = n
        if averages:
            c = c / np.sinc((np.arange(n) - n // 2) / n).reshape(shape)
        if n % 2 == 0:
            idx = [slice(None)] * c.ndim
            idx[a] = 0
            c[tuple(idx)] = 0.0
    return c


@dataclass(frozen=True)
class SpectralField1D:
    """f(x) = sum_k c_k exp(i kappa_k (x - x0)) with period ``length``."""

    coef: np.ndarray
    x0: float
    length: float

    def __call__(self, x, direct: bool = False) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        theta = (2 * np.pi / self.length) * (x.reshape(-1) - self.x0)
        if finufft is not None and not direct and theta.size > 64:
            th = np.mod(theta + np.pi, 2 * np.pi) - np.pi
            vals = finufft.nufft1d2(th, np.ascontiguousarray(self.coef), isign=1, eps=NUFFT_EPS)
        else:
            k = np.arange(self.coef.size) - self.coef.size // 2
            vals = np.exp(1j * np.outer(theta, k)) @ self.coef
        return vals.real.reshape(x.shape)

    def scaled(self, s: float) -> "SpectralField1D":
        return SpectralField1D(self.coef * s, self.x0, self.length)

    def derivative(self) -> "SpectralField1D":
        return SpectralField1D(1j * _wavenumbers(self.coef.size, self.length) * self.coef, self.x0, self.length)

    def l2_squared(self) -> float:
        return float(self.length * np.sum(np.abs(self.coef) ** 2))


@dataclass(frozen=True)
class SpectralField2D:
    coef: np.ndarray
    x0: float
    y0: float
    lx: float
    ly: float

    def __call__(self, x, y, direct: bool = False) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        tx = (2 * np.pi / self.lx) * (x.reshape(-1) - self.x0)
        ty = (2 * np.pi / self.ly) * (y.reshape(-1) - self.y0)
        if finufft is not None and not direct and tx.size > 64:
            tx = np.mod(tx + np.pi, 2 * np.pi) - np.pi
            ty = np.mod(ty + np.pi, 2 * np.pi) - np.pi
            vals = finufft.nufft2d2(tx, ty, np.ascontiguousarray(self.coef), isign=1, eps=NUFFT_EPS)
        else:
            n1, n2 = self.coef.shape
            k1 = np.arange(n1) - n1 // 2
            k2 = np.arange(n2) - n2 // 2
            vals = np.einsum("pk,kl,pl->p", np.exp(1j * np.outer(tx, k1)), self.coef,
                             np.exp(1j * np.outer(ty, k2)))
        return vals.real.reshape(x.shape)

    def evaluate_with(self, other: "SpectralField2D", x, y):
        """(self(x, y), other(x, y)) sharing one non-uniform FFT plan; both must live on the same grid."""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        if finufft is None or x.size <= 64:
            return self(x, y), other(x, y)
        tx = np.mod((2 * np.pi / self.lx) * (x.reshape(-1) - self.x0) + np.pi, 2 * np.pi) - np.pi
        ty = np.mod((2 * np.pi / self.ly) * (y.reshape(-1) - self.y0) + np.pi, 2 * np.pi) - np.pi
        vals = finufft.nufft2d2(tx, ty, np.ascontiguousarray(np.stack([self.coef, other.coef])), isign=1,
                                eps=NUFFT_EPS)
        return vals[0].real.reshape(x.shape), vals[1].real.reshape(x.shape)

    def wavenumbers(self):
        n1, n2 = self.coef.shape
        return _wavenumbers(n1, self.lx)[:, None], _wavenumbers(n2, self.ly)[None, :]

    def like(self, coef) -> "SpectralField2D":
        return SpectralField2D(coef, self.x0, self.y0, self.lx, self.ly)

    def l2_squared(self) -> float:
        return float(self.lx * self.ly * np.sum(np.abs(self.coef) ** 2))


def samples_2d(grid: Grid, values: np.ndarray, averages: bool = True) -> SpectralField2D:
    return SpectralField2D(_spectrum(values, (0, 1), averages), grid.x_lo + 0.5 * grid.dx, grid.y_lo + 0.5 * grid.dy,
                           grid.x_hi - grid.x_lo, grid.y_hi - grid.y_lo)


def _check_mean(mean: float, scale: float, what: str):
    if abs(mean) > 1e-10 * max(1.0, scale):
        raise ChargeNeutralityError(f"{what} has mean {mean:.3e}; the periodic Poisson problem needs zero mean")


# ---------------------------------------------------------------- Vlasov-Poisson

def charge_density(mf: MomentField, rho0: float | None = None) -> np.ndarray:
    g = mf.grid
    n = g.dy * mf.ubar.sum(axis=1)
    if rho0 is None:
        rho0 = float(n.mean())
    return n - rho0


def vp_efield(mf: MomentField, rho0: float | None = None) -> SpectralField1D:
    """E(x) with E = -phi_x and -phi_xx = rho; x is the first grid axis."""
    g = mf.grid
    if not g.periodic_x:
        raise ValueError("the Poisson solve needs a periodic x direction")
    rho = charge_density(mf, rho0)
    _check_mean(float(rho.mean()), float(np.abs(rho).max()), "charge density")
    L = g.x_hi - g.x_lo
    rh = _spectrum(rho, (0,), averages=True)
    kap = _wavenumbers(g.nx, L)
    Eh = np.zeros_like(rh)
    nz = kap != 0
    Eh[nz] = -1j * rh[nz] / kap[nz]
    return SpectralField1D(Eh, g.x_lo + 0.5 * g.dx, L)


def vp_velocity(E: SpectralField1D, speed_scale: float = 1.0) -> VelocityField:
    """Phase-space velocity (speed_scale * v, E(x)) with frozen E."""
    return VelocityField.frozen_spectral(lambda x, y: speed_scale * y + 0 * x, lambda x, y: E(x) + 0 * y)


# ---------------------------------------------------------------- 2-D models

def _inverse_laplacian(field: SpectralField2D) -> SpectralField2D:
    """Phi with -Laplace(Phi) = field (zero mean mode)."""
    kx, ky = field.wavenumbers()
    k2 = kx ** 2 + ky ** 2
    out = np.zeros_like(field.coef)
    nz = k2 != 0
    out[nz] = field.coef[nz] / k2[nz]
    return field.like(out)


def _perp_gradient(phi: SpectralField2D):
    """(-phi_y, phi_x) as coefficient tables."""
    kx, ky = phi.wavenumbers()
    return phi.like(-1j * ky * phi.coef), phi.like(1j * kx * phi.coef)


def _periodic_samples(mf: MomentField, what: str) -> SpectralField2D:
    g = mf.grid
    if not (g.periodic_x and g.periodic_y):
        raise ValueError("the 2-D Poisson solve needs a fully periodic grid")
    _check_mean(float(mf.ubar.mean()), float(np.abs(mf.ubar).max()), what)
    return samples_2d(g, mf.ubar)


def gc_potential(mf: MomentField) -> SpectralField2D:
    return _inverse_laplacian(_periodic_samples(mf, "charge density"))


def gc_velocity(mf: MomentField):
    """E-perp = (-Phi_y, Phi_x) with -Laplace(Phi) = rho."""
    return _perp_gradient(gc_potential(mf))


def euler_streamfunction(mf: MomentField) -> SpectralField2D:
    phi = _inverse_laplacian(_periodic_samples(mf, "vorticity"))
    return phi.like(-phi.coef)


def euler_velocity(mf: MomentField):
    """u = (-psi_y, psi_x) with Laplace(psi) = omega."""
    return _perp_gradient(euler_streamfunction(mf))


def divergence_coefficients(u: SpectralField2D, v: SpectralField2D) -> np.ndarray:
    kx, ky = u.wavenumbers()
    return 1j * kx * u.coef + 1j * ky * v.coef


def poisson_residual(rho: SpectralField2D, phi: SpectralField2D) -> float:
    """Relative residual of -Laplace(phi) = rho - mean(rho) in coefficient space."""
    kx, ky = phi.wavenumbers()
    lap = (kx ** 2 + ky ** 2) * phi.coef
    target = rho.coef.copy()
    c = tuple(n // 2 for n in target.shape)
    target[c] = 0.0
    for a, n in enumerate(target.shape):
        if n % 2 == 0:
            idx = [slice(None)] * 2
            idx[a] = 0
            target[tuple(idx)] = 0.0
    return float(np.abs(lap - target).max() / max(np.abs(target).max(), 1e-300))


def combine(terms) -> SpectralField2D:
    """Sum of c * field over (c, field) pairs sharing one layout."""
    c0, f0 = terms[0]
    coef = c0 * f0.coef
    for c, f in terms[1:]:
        coef = coef + c * f.coef
    return f0.like(coef)


def combine_1d(terms) -> SpectralField1D:
    c0, f0 = terms[0]
    coef = c0 * f0.coef
    for c, f in terms[1:]:
        coef = coef + c * f.coef
    return SpectralField1D(coef, f0.x0, f0.length)


def spectral_velocity(u: SpectralField2D, v: SpectralField2D) -> VelocityField:
    return VelocityField.frozen_spectral(lambda x, y: u(x, y), lambda x, y: v(x, y),
                                         lambda x, y: u.evaluate_with(v, x, y))
