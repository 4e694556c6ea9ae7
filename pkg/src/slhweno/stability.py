"""Von Neumann analysis of the linear scheme for constant-coefficient transport.

For a shift of (theta1, theta2) cells per step the update is translation
invariant, so each Fourier mode exp(i xi . j) of the moments (ubar, vbar,
wbar) evolves by a 3x3 matrix A. The matrix is read off the production
step applied to moment impulses; an independent path integrates the
reconstructed Fourier mode over the shifted cell.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .integrator import StepConfig, sl_step
from .mesh import Grid, MomentField, basis, gauss_legendre_unit
from .reconstruction import ReconConfig, recon_cell_2d, recon_first_moment_1d
from .tracing import VelocityField

LINEAR = StepConfig(recon=ReconConfig(scheme="linear"))
_BLOCK = 8  # periodic block per impulse; the response footprint is 5 cells wide


def impulse_responses(theta1: float, theta2: float, block: int = _BLOCK) -> np.ndarray:
    """R[d1, d2, out, in] for offsets wrapped to [-block/2, block/2).

    The three unit impulses sit in separate blocks of one periodic grid and
    go through a single step with the actual code path.
    """
    span = block + 2 * math.ceil(max(abs(theta1), abs(theta2)))
    g = Grid(0.0, 3.0 * span, 0.0, float(span), 3 * span, span)
    mom = np.zeros((3, 3 * span, span))
    for m in range(3):
        mom[m, m * span, 0] = 1.0
    out = sl_step(MomentField(g, *mom), VelocityField.uniform(theta1, theta2), 1.0, LINEAR)
    new = (out.ubar, out.vbar, out.wbar)
    h = span // 2
    R = np.empty((span, span, 3, 3))
    for m in range(3):
        for o in range(3):
            blockvals = np.roll(new[o], -m * span, axis=0)
            idx = (np.arange(span) - h) % (3 * span)
            R[:, :, o, m] = np.roll(blockvals[idx], h, axis=1)
    return R  # R[a, b] is the offset (a - h, b - h)


def _assemble(R: np.ndarray, xi1, xi2) -> np.ndarray:
    span = R.shape[0]
    d = np.arange(span) - span // 2
    e1 = np.exp(-1j * np.outer(np.atleast_1d(xi1), d))
    e2 = np.exp(-1j * np.outer(np.atleast_1d(xi2), d))
    return np.einsum("ap,bq,pqij->abij", e1, e2, R)


def build_amplification(theta1: float, theta2: float, xi1: float, xi2: float, reduce: bool = True) -> np.ndarray:
    """A(theta1, theta2, xi1 dx, xi2 dy) from the code path.

    With ``reduce`` the integer parts of the shifts become a pure phase and only
    the fractional shift is simulated.
    """
    phase = 1.0
    if reduce:
        f1, f2 = math.floor(theta1), math.floor(theta2)
        phase = np.exp(-1j * (xi1 * f1 + xi2 * f2))
        theta1, theta2 = theta1 - f1, theta2 - f2
    return phase * _assemble(impulse_responses(theta1, theta2), xi1, xi2)[0, 0]


# ---------------------------------------------------------------- closed-form path

def _mode_coefficients(xi1: float, xi2: float) -> np.ndarray:
    """Cubic coefficients (10, 3) on cell 0 for unit Fourier modes of each moment."""
    o = np.arange(-2, 3)
    ph = np.exp(1j * (xi1 * o[:, None] + xi2 * o[None, :]))  # 5x5 around cell 0
    cfg = ReconConfig(scheme="linear")
    out = np.empty((10, 3), dtype=complex)
    for m in range(3):
        comps = []
        for part in (np.real, np.imag):
            mom = np.zeros((3, 5, 5))
            mom[m] = part(ph)
            U, V, W = mom
            c = slice(1, 4)
            vt = recon_first_moment_1d(U[1, 2], U[2, 2], U[3, 2], V[1, 2], V[3, 2], cfg).vt
            wt = recon_first_moment_1d(U[2, 1], U[2, 2], U[2, 3], W[2, 1], W[2, 3], cfg).vt
            comps.append(recon_cell_2d(U[c, c], vt, wt, cfg))
        out[:, m] = comps[0] + 1j * comps[1]
    return out


def amplification_closed_form(theta1: float, theta2: float, xi1: float, xi2: float, n_gauss: int = 4) -> np.ndarray:
    """A for fractional shifts by exact quadrature of the mode over the shifted cell."""
    if not (0 <= theta1 <= 1 and 0 <= theta2 <= 1):
        raise ValueError("the closed form covers shifts in [0, 1]")
    K = _mode_coefficients(xi1, xi2)
    t, w = gauss_legendre_unit(n_gauss)
    A = np.zeros((3, 3), dtype=complex)
    # pieces of [-1/2 - theta, 1/2 - theta] in cells -1 and 0 (local coordinates)
    pieces = lambda th: [(-1, 0.5 - th, 0.5), (0, -0.5, 0.5 - th)]
    for c1, a1, b1 in pieces(theta1):
        for c2, a2, b2 in pieces(theta2):
            L1, L2 = b1 - a1, b2 - a2
            if L1 <= 0 or L2 <= 0:
                continue
            mu = a1 + (t + 0.5) * L1
            nu = a2 + (t + 0.5) * L2
            B = basis(mu[:, None] + 0 * nu[None, :], 0 * mu[:, None] + nu[None, :], 10)
            H = np.exp(1j * (xi1 * c1 + xi2 * c2)) * np.einsum("abl,lm->abm", B, K)
            ww = np.outer(w, w) * L1 * L2
            X = (mu + c1 + theta1)[:, None] + 0 * nu[None, :]
            Y = 0 * mu[:, None] + (nu + c2 + theta2)[None, :]
            A[0] += np.einsum("abm,ab->m", H, ww)
            A[1] += np.einsum("abm,ab->m", H, ww * X)
            A[2] += np.einsum("abm,ab->m", H, ww * Y)
    return A


# ---------------------------------------------------------------- sweeps

def spectral_radius(A: np.ndarray) -> np.ndarray:
    return np.abs(np.linalg.eigvals(A)).max(axis=-1)


@dataclass
class SweepResult:
    max_rho: float
    argmax: tuple  # (theta1, theta2, xi1, xi2)
    slices: np.ndarray  # rows theta1, theta2, max rho over xi, xi1, xi2 at that max
    n_s: int


def sweep_spectral_radius(n_s: int, progress=None) -> SweepResult:
    """Max spectral radius over a uniform n_s^4 grid of [0, 1]^2 x [0, 2 pi]^2."""
    if n_s < 2:
        raise ValueError("n_s must be at least 2")
    thetas = np.linspace(0.0, 1.0, n_s)
    xis = np.linspace(0.0, 2 * np.pi, n_s)
    slices = np.empty((n_s * n_s, 5))
    best = (-1.0, None)
    k = 0
    for t1 in thetas:
        for t2 in thetas:
            rho = spectral_radius(_assemble(impulse_responses(t1, t2), xis, xis))
            a, b = np.unravel_index(np.argmax(rho), rho.shape)
            slices[k] = t1, t2, rho[a, b], xis[a], xis[b]
            if rho[a, b] > best[0]:
                best = (float(rho[a, b]), (float(t1), float(t2), float(xis[a]), float(xis[b])))
            k += 1
        if progress is not None:
            progress(k / (n_s * n_s))
    return SweepResult(best[0], best[1], slices, n_s)


def write_slices_csv(path, result: SweepResult):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta1", "theta2", "max_rho", "xi1", "xi2"])
        for row in result.slices:
            w.writerow([repr(float(v)) for v in row])
