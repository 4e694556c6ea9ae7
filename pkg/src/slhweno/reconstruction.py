"""Hermite WENO recovery of a piecewise cubic from P1 moments.

Every routine here is elementwise over arrays of stencils, so a whole field is
reconstructed with a handful of numpy expressions. Stencil axes follow the
convention ``U[..., a, b]`` = cell average at offset ``(a - 1, b - 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .mesh import Grid, MomentField, pad

SCHEMES = ("hweno1", "hweno2", "linear")


@dataclass(frozen=True)
class ReconConfig:
    scheme: str = "hweno1"
    gamma_1d: tuple = (0.6, 0.2, 0.2)
    gamma_2d: tuple = (0.6, 0.1, 0.1, 0.1, 0.1)
    eps: float = 1e-40
    c_t: float = 1e-3
    power: int = 6
    debug: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown reconstruction {self.scheme!r}; expected one of {SCHEMES}")
        for g in (self.gamma_1d, self.gamma_2d):
            if min(g) <= 0 or abs(sum(g) - 1.0) > 1e-14:
                raise ValueError("linear weights must be positive and sum to one")
        if not self.eps > 0 or not 0 < self.c_t < 1:
            raise ValueError("need eps > 0 and 0 < c_t < 1")


class FirstMoment(NamedTuple):
    vt: np.ndarray
    beta: np.ndarray  # (..., 4): beta_0 .. beta_3
    tau: np.ndarray
    candidates: np.ndarray  # (..., 4): vt_0 .. vt_3


@dataclass(frozen=True)
class ReconField:
    grid: Grid
    coef: np.ndarray  # (nx, ny, 10) coefficients over P_1..P_10
    vt: np.ndarray
    wt: np.ndarray


def _quartic_coefficients(um, u0, up, vm, vp):
    """Monomial coefficients of the quartic matching 3 averages and the 2 outer moments."""
    c1 = -63 / 76 * (um - up) - 75 / 19 * (vm + vp)
    c2 = -23 / 8 * u0 + 23 / 16 * (um + up) + 45 / 8 * (vm - vp)
    c3 = 5 / 19 * (um - up) + 60 / 19 * (vm + vp)
    c4 = 5 / 4 * u0 - 5 / 8 * (um + up) - 15 / 4 * (vm - vp)
    return c1, c2, c3, c4


def quartic_smoothness(um, u0, up, vm, vp):
    """beta_0: sum over l = 1..4 of the scaled squared l-th derivative of the quartic."""
    c1, c2, c3, c4 = _quartic_coefficients(um, u0, up, vm, vp)
    return (c1 * c1 + 0.5 * c1 * c3 + 13 / 3 * c2 * c2 + 21 / 5 * c2 * c4
            + 3129 / 80 * c3 * c3 + 87617 / 140 * c4 * c4)


def _separation_weights(tau, beta, eps, power):
    """Normalised (1 + tau/(beta + eps))**power along the last axis, overflow-safe."""
    r = 1.0 + tau[..., None] / (beta + eps)
    r = r / r.max(axis=-1, keepdims=True)
    eta = r ** power
    return eta / eta.sum(axis=-1, keepdims=True)


def recon_first_moment_1d(um, u0, up, vm, vp, cfg: ReconConfig = ReconConfig()) -> FirstMoment:
    """Reconstruct the centre first moment from a 3-cell stencil along one axis.

    The centre cell's own first moment is not an input: it is exactly what is
    being replaced.
    """
    um, u0, up, vm, vp = (np.asarray(a, dtype=float) for a in (um, u0, up, vm, vp))
    v0 = -5 / 76 * um - 11 / 38 * vm - 11 / 38 * vp + 5 / 76 * up
    v1 = (u0 - um) / 6 - vm
    v2 = (up - um) / 24
    v3 = (up - u0) / 6 - vp
    b0 = quartic_smoothness(um, u0, up, vm, vp)
    b1 = (12 * v1) ** 2 + 156 * (v1 - vm) ** 2
    b2 = (12 * v2) ** 2 + 13 / 12 * (up - 2 * u0 + um) ** 2
    b3 = (12 * v3) ** 2 + 156 * (vp - v3) ** 2
    tau = (0.5 * (np.abs(b0 - b1) + np.abs(b0 - b3))) ** 2
    beta = np.stack([b0, b1, b2, b3], axis=-1)
    cand = np.stack([v0, v1, v2, v3], axis=-1)

    if cfg.scheme == "linear":
        vt = v0
    elif cfg.scheme == "hweno1":
        g0, g1, g3 = cfg.gamma_1d
        w0 = g0 * (1 + tau / (b0 + cfg.eps))
        w1 = g1 * (1 + tau / (b1 + cfg.eps))
        w3 = g3 * (1 + tau / (b3 + cfg.eps))
        s = w0 + w1 + w3
        w0, w1, w3 = w0 / s, w1 / s, w3 / s
        vt = w0 / g0 * (v0 - g1 * v1 - g3 * v3) + w1 * v1 + w3 * v3
    else:
        kappa = _separation_weights(tau, beta[..., 1:], cfg.eps, cfg.power)
        # ties between the one-sided candidates go to the lower index
        one_sided = np.where(kappa[..., 2] > kappa[..., 0], v3, v1)
        vt = np.where(kappa.min(axis=-1) > cfg.c_t, v0, one_sided)
    return FirstMoment(vt, beta, tau, cand)


def q0_coefficients(U, vt, wt) -> np.ndarray:
    """Coefficients a_1..a_11 of the 11-condition cubic-plus-P11 fit (last axis)."""
    um0, u00, up0 = U[..., 0, 1], U[..., 1, 1], U[..., 2, 1]
    u0m, u0p = U[..., 1, 0], U[..., 1, 2]
    umm, upm, ump, upp = U[..., 0, 0], U[..., 2, 0], U[..., 0, 2], U[..., 2, 2]
    a = [
        u00,
        12 * vt,
        12 * wt,
        0.5 * um0 - u00 + 0.5 * up0,
        0.25 * (umm - upm - ump + upp),
        0.5 * u0m - u00 + 0.5 * u0p,
        -5 / 11 * um0 + 5 / 11 * up0 - 120 / 11 * vt,
        -0.25 * umm + 0.5 * u0m - 0.25 * upm + 0.25 * ump - 0.5 * u0p + 0.25 * upp,
        -0.25 * umm + 0.5 * um0 - 0.25 * ump + 0.25 * upm - 0.5 * up0 + 0.25 * upp,
        -5 / 11 * u0m + 5 / 11 * u0p - 120 / 11 * wt,
        0.25 * (umm + upm + ump + upp) - 0.5 * (um0 + up0 + u0m + u0p) + u00,
    ]
    return np.stack(np.broadcast_arrays(*a), axis=-1)


def quadratic_coefficients(U, vt, wt) -> np.ndarray:
    """Coefficients a_4..a_6 of the four one-sided quadratics, shape (..., 4, 3)."""
    u00 = U[..., 1, 1]
    um0, up0, u0m, u0p = U[..., 0, 1], U[..., 2, 1], U[..., 1, 0], U[..., 1, 2]
    umm, upm, ump, upp = U[..., 0, 0], U[..., 2, 0], U[..., 0, 2], U[..., 2, 2]
    left = um0 - u00 + 12 * vt
    right = up0 - u00 - 12 * vt
    below = u0m - u00 + 12 * wt
    above = u0p - u00 - 12 * wt
    q = [
        [left, umm - u0m - um0 + u00, below],   # cells 1, 2, 4, 5
        [right, u0m - upm - u00 + up0, below],  # cells 2, 3, 5, 6
        [left, um0 - u00 - ump + u0p, above],   # cells 4, 5, 7, 8
        [right, u00 - up0 - u0p + upp, above],  # cells 5, 6, 8, 9
    ]
    return np.stack([np.stack(np.broadcast_arrays(*row), axis=-1) for row in q], axis=-2)


def smoothness_cubic(a) -> np.ndarray:
    """Scaled derivative energy of a cubic given its P_1..P_10 coefficients."""
    return ((a[..., 1] + a[..., 6] / 10) ** 2 + (a[..., 2] + a[..., 9] / 10) ** 2
            + 13 / 3 * a[..., 3] ** 2 + 7 / 6 * a[..., 4] ** 2 + 13 / 3 * a[..., 5] ** 2
            + 781 / 20 * a[..., 6] ** 2 + 47 / 10 * a[..., 7] ** 2
            + 47 / 10 * a[..., 8] ** 2 + 781 / 20 * a[..., 9] ** 2)


def smoothness_quadratic(a2, a3, a456) -> np.ndarray:
    """Same energy for quadratics; ``a456`` holds a_4..a_6 on its last axis."""
    return (a2[..., None] ** 2 + a3[..., None] ** 2 + 13 / 3 * a456[..., 0] ** 2
            + 7 / 6 * a456[..., 1] ** 2 + 13 / 3 * a456[..., 2] ** 2)


def recon_cell_2d(U, vt, wt, cfg: ReconConfig = ReconConfig(), return_indicators: bool = False):
    """Cubic coefficients a_1..a_10 from a 3x3 stencil of averages and the
    reconstructed centre first moments."""
    U = np.asarray(U, dtype=float)
    vt = np.asarray(vt, dtype=float)
    wt = np.asarray(wt, dtype=float)
    full = q0_coefficients(U, vt, wt)
    if cfg.debug:
        _check_q0_conditions(U, vt, wt, full)
    q0 = full[..., :10]
    quad = quadratic_coefficients(U, vt, wt)
    b0 = smoothness_cubic(q0)
    bk = smoothness_quadratic(q0[..., 1], q0[..., 2], quad)
    tau = (np.abs(b0[..., None] - bk).mean(axis=-1)) ** 2

    if cfg.scheme == "linear":
        out = q0.copy()
    elif cfg.scheme == "hweno1":
        g = np.asarray(cfg.gamma_2d)
        beta = np.concatenate([b0[..., None], bk], axis=-1)
        w = g * (1 + tau[..., None] / (beta + cfg.eps))
        w = w / w.sum(axis=-1, keepdims=True)
        scale = w[..., 0] / g[0]
        out = q0 * scale[..., None]
        out[..., 0:3] = q0[..., 0:3]
        mix = w[..., 1:] - scale[..., None] * g[1:]
        out[..., 3:6] += np.einsum("...k,...kl->...l", mix, quad)
    else:
        kappa = _separation_weights(tau, bk, cfg.eps, cfg.power)
        pick = np.argmax(kappa, axis=-1)
        chosen = np.take_along_axis(quad, pick[..., None, None], axis=-2)[..., 0, :]
        one_sided = np.zeros_like(q0)
        one_sided[..., 0:3] = q0[..., 0:3]
        one_sided[..., 3:6] = chosen
        use_q0 = kappa.min(axis=-1) > cfg.c_t
        out = np.where(use_q0[..., None], q0, one_sided)
    if return_indicators:
        return out, np.concatenate([b0[..., None], bk], axis=-1), tau
    return out


def _check_q0_conditions(U, vt, wt, a11, tol=1e-12):
    """Re-verify the 11 defining conditions of the full fit by quadrature."""
    from .mesh import basis, gauss_legendre_unit

    t, w = gauss_legendre_unit(4)
    ww = w[:, None] * w[None, :]
    scale = max(1.0, float(np.max(np.abs(U))), float(np.max(np.abs(12 * vt))),
                float(np.max(np.abs(12 * wt))))
    for a in range(3):
        for b in range(3):
            mu = t[:, None] + (a - 1)
            nu = t[None, :] + (b - 1)
            ph = np.einsum("xyl,...l->...xy", basis(mu, nu, 11), a11)
            avg = np.einsum("...xy,xy->...", ph, ww)
            if np.max(np.abs(avg - U[..., a, b])) > tol * scale:
                raise AssertionError(f"average condition violated in stencil cell {(a, b)}")
            if a == 1 and b == 1:
                mv = np.einsum("...xy,xy,x->...", ph, ww, t)
                mw = np.einsum("...xy,xy,y->...", ph, ww, t)
                if max(np.max(np.abs(mv - vt)), np.max(np.abs(mw - wt))) > tol * scale:
                    raise AssertionError("first-moment condition violated")


def recon_field(mf: MomentField, cfg: ReconConfig = ReconConfig()) -> ReconField:
    """Run both reconstruction steps over every cell of the field."""
    g = mf.grid
    U = pad(mf.ubar, g)
    V = pad(mf.vbar, g)
    W = pad(mf.wbar, g)
    c = slice(1, -1)
    vt = recon_first_moment_1d(U[:-2, c], U[c, c], U[2:, c], V[:-2, c], V[2:, c], cfg).vt
    wt = recon_first_moment_1d(U[c, :-2], U[c, c], U[c, 2:], W[c, :-2], W[c, 2:], cfg).vt
    nx, ny = g.shape
    stencil = np.empty((nx, ny, 3, 3))
    for a in range(3):
        for b in range(3):
            stencil[:, :, a, b] = U[a:a + nx, b:b + ny]
    coef = recon_cell_2d(stencil, vt, wt, cfg)
    return ReconField(g, coef, vt, wt)


def eval_cubic(coef, mu, nu):
    """Evaluate a cubic with coefficients over P_1..P_10 at local coordinates."""
    from .mesh import basis

    return np.einsum("...l,...l->...", basis(mu, nu, 10), coef)
