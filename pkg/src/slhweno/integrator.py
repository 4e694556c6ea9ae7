"""Moment update over upstream cells by line integrals.

Each moment is (1/dx dy) times the integral of H w over the upstream cell.
By Green's theorem with P = 0 this is the boundary integral of Q dy, where Q is
an x-antiderivative of H w. Production code uses, within each mesh row, the
antiderivative that is continuous across vertical mesh lines: the inner
segments of the clipped polygons then cancel analytically (vertical ones by
continuity, horizontal ones because dy = 0) and only the outer pieces of the
upstream boundary are integrated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .errors import PositivityError, ReconstructionMissingError
from .geometry import EdgePieces, clip_upstream, dump_segments, edge_pieces, wrap_cell
from .mesh import Grid, MomentField, basis
from .reconstruction import ReconConfig, recon_field
from .tracing import GLL4, VelocityField, lattice_edges, trace_lattice, upstream_cell


@dataclass(frozen=True)
class StepConfig:
    """``pp`` scales each reconstruction to be nonnegative before integration;
    ``pp_moments`` additionally scales the new P1 slopes to nonnegative corners.
    ``n_sub = None`` lets the time loop pick one RK4 substep per unit of Courant number."""

    recon: ReconConfig = field(default_factory=ReconConfig)
    pp: bool = False
    pp_moments: bool = False
    n_sub: int | None = 1
    gauss_curved: int = 13
    gauss_affine: int = 4


# ---------------------------------------------------------------- kernels


@njit(cache=True)
def _cubic(c, t):
    return ((c[0] * t + c[1]) * t + c[2]) * t + c[3]


@njit(cache=True)
def _dcubic(c, t):
    return (3.0 * c[0] * t + 2.0 * c[1]) * t + c[2]


@njit(cache=True, inline="always")
def _h_in_mu(a, nu):
    """H at fixed nu as a cubic in mu."""
    n2 = nu * nu - 1.0 / 12.0
    A0 = a[0] + a[2] * nu - a[3] / 12.0 + a[5] * n2 - a[7] * nu / 12.0 + a[9] * (nu * nu * nu - 0.15 * nu)
    A1 = a[1] + a[4] * nu - 0.15 * a[6] + a[8] * n2
    A2 = a[3] + a[7] * nu
    return A0, A1, A2, a[6]


@njit(cache=True, inline="always")
def _w_in_x(c, Y):
    """Test polynomial at fixed Y as a cubic in X."""
    return (c[0] + Y * (c[2] + Y * (c[5] + Y * c[9])), c[1] + Y * (c[4] + Y * c[8]),
            c[3] + c[7] * Y, c[6])


@njit(cache=True, inline="always")
def _column_integral(A0, A1, A2, A3, B0, B1, B2, B3, d, mu, full):
    """Integral in mu over [-1/2, mu] (or the whole column) of A(mu) B(mu + d)."""
    C0 = B0 + d * (B1 + d * (B2 + d * B3))
    C1 = B1 + d * (2.0 * B2 + 3.0 * d * B3)
    C2 = B2 + 3.0 * d * B3
    C3 = B3
    D0 = A0 * C0
    D1 = A0 * C1 + A1 * C0
    D2 = A0 * C2 + A1 * C1 + A2 * C0
    D3 = A0 * C3 + A1 * C2 + A2 * C1 + A3 * C0
    D4 = A1 * C3 + A2 * C2 + A3 * C1
    D5 = A2 * C3 + A3 * C2
    D6 = A3 * C3
    if full:
        return D0 + D2 / 12.0 + D4 / 80.0 + D6 / 448.0
    # antiderivative at mu minus its value at -1/2
    up = mu * (D0 + mu * (D1 / 2.0 + mu * (D2 / 3.0 + mu * (D3 / 4.0 + mu * (D4 / 5.0 + mu * (D5 / 6.0 + mu * D6 / 7.0))))))
    m = -0.5
    lo = m * (D0 + m * (D1 / 2.0 + m * (D2 / 3.0 + m * (D3 / 4.0 + m * (D4 / 5.0 + m * (D5 / 6.0 + m * D6 / 7.0))))))
    return up - lo


@njit(cache=True)
def _wrap(p, n, periodic):
    if periodic:
        r = p % n
        return r if r >= 0 else r + n
    if 0 <= p < n:
        return p
    return -1


@njit(cache=True)
def _integrate_piece(cx, cy, ta, tb, sign, p, q, p0, coef, wc, xc, yc,
                     x_lo, dx, y_lo, dy, nx, ny, per_x, per_y, gt, gw):
    qi = _wrap(q, ny, per_y)
    r0 = 0.0
    r1 = 0.0
    r2 = 0.0
    if qi < 0:
        return r0, r1, r2
    half = 0.5 * (tb - ta)
    mid = 0.5 * (ta + tb)
    for m in range(gt.shape[0]):
        t = mid + half * gt[m]
        x = _cubic(cx, t)
        y = _cubic(cy, t)
        wgt = sign * gw[m] * half * _dcubic(cy, t)
        if wgt == 0.0:
            continue
        nu = (y - y_lo) / dy - (q + 0.5)
        Y = (y - yc) / dy
        P0, P1, P2, P3 = _w_in_x(wc[0], Y)
        S0, S1, S2, S3 = _w_in_x(wc[1], Y)
        mu = (x - x_lo) / dx - (p + 0.5)
        g0 = 0.0
        g1 = 0.0
        g2 = 0.0
        for pc in range(p0, p + 1):
            pi = _wrap(pc, nx, per_x)
            if pi < 0:
                continue
            A0, A1, A2, A3 = _h_in_mu(coef[pi, qi], nu)
            d = (x_lo + (pc + 0.5) * dx - xc) / dx
            full = pc < p
            g0 += _column_integral(A0, A1, A2, A3, 1.0, 0.0, 0.0, 0.0, d, mu, full)
            g1 += _column_integral(A0, A1, A2, A3, P0, P1, P2, P3, d, mu, full)
            g2 += _column_integral(A0, A1, A2, A3, S0, S1, S2, S3, d, mu, full)
        r0 += wgt * g0
        r1 += wgt * g1
        r2 += wgt * g2
    return r0 * dx, r1 * dx, r2 * dx


@njit(cache=True, parallel=True)
def _update_kernel(h_off, h_ta, h_tb, h_p, h_q, hx, hy, h_aff,
                   v_off, v_ta, v_tb, v_p, v_q, vx, vy, v_aff,
                   coef, wcoef, wcen, x_lo, dx, y_lo, dy, per_x, per_y,
                   gt_a, gw_a, gt_c, gw_c, out):
    nx = coef.shape[0]
    ny = coef.shape[1]
    for cell in prange(nx * ny):
        i = cell // ny
        j = cell - i * ny
        eh0 = i * (ny + 1) + j
        eh1 = eh0 + 1
        ev0 = i * ny + j
        ev1 = ev0 + ny
        p0 = 1 << 60
        for k in range(h_off[eh0], h_off[eh0 + 1]):
            p0 = min(p0, h_p[k])
        for k in range(h_off[eh1], h_off[eh1 + 1]):
            p0 = min(p0, h_p[k])
        for k in range(v_off[ev0], v_off[ev0 + 1]):
            p0 = min(p0, v_p[k])
        for k in range(v_off[ev1], v_off[ev1 + 1]):
            p0 = min(p0, v_p[k])
        acc0 = 0.0
        acc1 = 0.0
        acc2 = 0.0
        wc = wcoef[i, j]
        xc = wcen[i, j, 0]
        yc = wcen[i, j, 1]
        for side in range(4):
            if side == 0:
                e, sgn, horiz = eh0, 1.0, True
            elif side == 1:
                e, sgn, horiz = ev1, 1.0, False
            elif side == 2:
                e, sgn, horiz = eh1, -1.0, True
            else:
                e, sgn, horiz = ev0, -1.0, False
            if horiz:
                cx = hx[e]
                cy = hy[e]
                aff = h_aff[e]
                k0 = h_off[e]
                k1 = h_off[e + 1]
            else:
                cx = vx[e]
                cy = vy[e]
                aff = v_aff[e]
                k0 = v_off[e]
                k1 = v_off[e + 1]
            gt = gt_a if aff else gt_c
            gw = gw_a if aff else gw_c
            for k in range(k0, k1):
                if horiz:
                    ta, tb, pp, qq = h_ta[k], h_tb[k], h_p[k], h_q[k]
                else:
                    ta, tb, pp, qq = v_ta[k], v_tb[k], v_p[k], v_q[k]
                r0, r1, r2 = _integrate_piece(cx, cy, ta, tb, sgn, pp, qq, p0, coef, wc, xc, yc,
                                              x_lo, dx, y_lo, dy, nx, ny, per_x, per_y, gt, gw)
                acc0 += r0
                acc1 += r1
                acc2 += r2
        s = 1.0 / (dx * dy)
        out[i, j, 0] = acc0 * s
        out[i, j, 1] = acc1 * s
        out[i, j, 2] = acc2 * s


@njit(cache=True, parallel=True)
def _lsq_kernel(FX, FY, cx, cy, dx, dy, rhs, coef, rank_ok):
    """Householder least squares of every 16 x 10 monomial system."""
    n = FX.shape[0]
    for c in prange(n):
        M = np.empty((16, 10))
        R = rhs.copy()
        for k in range(16):
            X = (FX[c, k] - cx[c]) / dx
            Y = (FY[c, k] - cy[c]) / dy
            M[k, 0] = 1.0
            M[k, 1] = X
            M[k, 2] = Y
            M[k, 3] = X * X
            M[k, 4] = X * Y
            M[k, 5] = Y * Y
            M[k, 6] = X * X * X
            M[k, 7] = X * X * Y
            M[k, 8] = X * Y * Y
            M[k, 9] = Y * Y * Y
        dmax = 0.0
        dmin = 1e300
        for col in range(10):
            nrm = 0.0
            for r in range(col, 16):
                nrm += M[r, col] * M[r, col]
            nrm = math.sqrt(nrm)
            alpha = -nrm if M[col, col] >= 0.0 else nrm
            v0 = M[col, col] - alpha
            vn = v0 * v0
            for r in range(col + 1, 16):
                vn += M[r, col] * M[r, col]
            if vn > 0.0:
                for cc in range(col + 1, 10):
                    s = v0 * M[col, cc]
                    for r in range(col + 1, 16):
                        s += M[r, col] * M[r, cc]
                    f = 2.0 * s / vn
                    M[col, cc] -= f * v0
                    for r in range(col + 1, 16):
                        M[r, cc] -= f * M[r, col]
                for w in range(R.shape[1]):
                    s = v0 * R[col, w]
                    for r in range(col + 1, 16):
                        s += M[r, col] * R[r, w]
                    f = 2.0 * s / vn
                    R[col, w] -= f * v0
                    for r in range(col + 1, 16):
                        R[r, w] -= f * M[r, col]
            M[col, col] = alpha
            dmax = max(dmax, abs(alpha))
            dmin = min(dmin, abs(alpha))
        rank_ok[c] = dmin > 1e-10 * dmax
        for w in range(R.shape[1]):
            for col in range(9, -1, -1):
                s = R[col, w]
                for cc in range(col + 1, 10):
                    s -= M[col, cc] * coef[c, w, cc]
                coef[c, w, col] = s / M[col, col] if M[col, col] != 0.0 else 0.0


# ---------------------------------------------------------------- wrappers


def test_polys(fx, fy, grid: Grid, vf: VelocityField | None = None, dt: float = 0.0):
    """Centres (nx, ny, 2) and coefficients (nx, ny, 2, 10) of the pulled-back mu and nu."""
    from .errors import GeometryDegeneracyError

    nx, ny = grid.shape
    ix = 3 * np.arange(nx)[:, None] + np.arange(4)[None, :]
    iy = 3 * np.arange(ny)[:, None] + np.arange(4)[None, :]
    FX = fx[ix[:, None, :, None], iy[None, :, None, :]].reshape(nx * ny, 16)
    FY = fy[ix[:, None, :, None], iy[None, :, None, :]].reshape(nx * ny, 16)
    cx = FX.mean(axis=1)
    cy = FY.mean(axis=1)
    if vf is not None and vf.constant is not None:
        # a translated affine function is affine: mu = X + (cx + a dt - x_i)/dx
        a0, b0 = vf.constant
        xi = (grid.x_centers()[:, None] + 0 * grid.y_centers()[None, :]).reshape(-1)
        yj = (0 * grid.x_centers()[:, None] + grid.y_centers()[None, :]).reshape(-1)
        coef = np.zeros((nx * ny, 2, 10))
        coef[:, 0, 0] = (cx + a0 * dt - xi) / grid.dx
        coef[:, 0, 1] = 1.0
        coef[:, 1, 0] = (cy + b0 * dt - yj) / grid.dy
        coef[:, 1, 2] = 1.0
    else:
        rhs = np.stack([np.repeat(0.5 * GLL4, 4), np.tile(0.5 * GLL4, 4)], axis=-1)
        coef = np.zeros((nx * ny, 2, 10))
        ok = np.zeros(nx * ny, dtype=np.bool_)
        _lsq_kernel(FX, FY, cx, cy, grid.dx, grid.dy, rhs, coef, ok)
        if not ok.all():
            k = int(np.argmin(ok))
            raise GeometryDegeneracyError(f"upstream feet of cell {divmod(k, ny)} do not determine a cubic")
    return np.stack([cx, cy], axis=-1).reshape(nx, ny, 2), coef.reshape(nx, ny, 2, 10)


def _affine_flags(ex, ey, grid: Grid):
    scale = 1e-14 * (grid.dx + grid.dy)
    return (np.maximum(np.abs(ex[..., :2]).max(axis=-1), np.abs(ey[..., :2]).max(axis=-1)) <= scale).reshape(-1)


@dataclass
class StepGeometry:
    grid: Grid
    fx: np.ndarray
    fy: np.ndarray
    hx: np.ndarray
    hy: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    hp: EdgePieces
    vp: EdgePieces
    wcen: np.ndarray
    wcoef: np.ndarray


def build_geometry(grid: Grid, vf: VelocityField, t_end: float, dt: float, n_sub: int = 1) -> StepGeometry:
    fx, fy = trace_lattice(grid, vf, t_end, dt, n_sub)
    hx, hy, vx, vy = lattice_edges(fx, fy, grid)
    hp = edge_pieces(hx, hy, grid)
    vp = edge_pieces(vx, vy, grid)
    wcen, wcoef = test_polys(fx, fy, grid, vf, dt)
    return StepGeometry(grid, fx, fy, hx, hy, vx, vy, hp, vp, wcen, wcoef)


def integrate_upstream(geo: StepGeometry, coef: np.ndarray, cfg: StepConfig = StepConfig()) -> np.ndarray:
    """New moments (nx, ny, 3) from the cubic coefficients of every background cell."""
    g = geo.grid
    if coef.shape != (g.nx, g.ny, 10) or not np.isfinite(coef).all():
        raise ReconstructionMissingError("reconstruction is missing or not finite on some cells")
    ta, wa = np.polynomial.legendre.leggauss(cfg.gauss_affine)
    tc, wc = np.polynomial.legendre.leggauss(cfg.gauss_curved)
    hx = np.ascontiguousarray(geo.hx.reshape(-1, 4))
    hy = np.ascontiguousarray(geo.hy.reshape(-1, 4))
    vx = np.ascontiguousarray(geo.vx.reshape(-1, 4))
    vy = np.ascontiguousarray(geo.vy.reshape(-1, 4))
    out = np.empty((g.nx, g.ny, 3))
    _update_kernel(*geo.hp, hx, hy, _affine_flags(hx, hy, g),
                   *geo.vp, vx, vy, _affine_flags(vx, vy, g),
                   np.ascontiguousarray(coef), np.ascontiguousarray(geo.wcoef),
                   np.ascontiguousarray(geo.wcen), g.x_lo, g.dx, g.y_lo, g.dy,
                   g.periodic_x, g.periodic_y, ta, wa, tc, wc, out)
    return out


# ---------------------------------------------------------------- positivity

def _bernstein_map() -> np.ndarray:
    """(16, 10) map from basis coefficients to tensor Bernstein coefficients on the cell."""
    t = np.arange(4) / 3.0
    B1 = np.array([[math.comb(3, r) * s ** r * (1 - s) ** (3 - r) for r in range(4)] for s in t])
    inv = np.linalg.inv(B1)
    mu = t - 0.5
    P = basis(mu[:, None], mu[None, :], 10)  # (4, 4, 10)
    return np.einsum("ra,sb,abl->rsl", inv, inv, P).reshape(16, 10)


_BERN = _bernstein_map()


def cubic_lower_bound(coef: np.ndarray) -> np.ndarray:
    """A guaranteed lower bound of each cubic over its cell."""
    return (coef @ _BERN.T).min(axis=-1)


def limit_cubic(coef: np.ndarray) -> np.ndarray:
    """Scale each cubic about its average so it is nonnegative on its cell."""
    ubar = coef[..., 0]
    m = cubic_lower_bound(coef)
    theta = np.ones_like(ubar)
    neg = m < 0
    u = np.maximum(ubar[neg], 0.0)
    theta[neg] = np.clip(u / (u - m[neg]), 0.0, 1.0)
    out = coef.copy()
    out[..., 1:] *= theta[..., None]
    return out


def check_averages(u: np.ndarray, tol: float = 1e-13):
    if (u < -tol).any():
        i, j = np.argwhere(u < -tol)[0]
        raise PositivityError(f"cell average {u[i, j]:.3e} < 0 in cell ({i}, {j})")


def pp_limit(mf: MomentField, tol: float = 1e-13) -> MomentField:
    """Scale the P1 slopes so the corner values are nonnegative."""
    u, v, w = mf.ubar, mf.vbar, mf.wbar
    check_averages(u, tol)
    m = u - 6.0 * (np.abs(v) + np.abs(w))
    theta = np.ones_like(u)
    neg = m < 0
    up = np.maximum(u[neg], 0.0)
    theta[neg] = np.where(up > 0, up / np.where(up > 0, up - m[neg], 1.0), 0.0)
    return MomentField(mf.grid, u.copy(), v * theta, w * theta)


# ---------------------------------------------------------------- step

def sl_step(mf: MomentField, vf: VelocityField, dt: float, cfg: StepConfig = StepConfig(),
            t: float = 0.0, dump=None) -> MomentField:
    """One semi-Lagrangian step from t to t + dt.

    ``dump``, if given, is a list receiving (cell, segment text) for every cell.
    """
    if not dt > 0:
        raise ValueError("time step must be positive")
    g = mf.grid
    rf = recon_field(mf, cfg.recon)
    coef = limit_cubic(rf.coef) if cfg.pp else rf.coef
    geo = build_geometry(g, vf, t + dt, dt, cfg.n_sub)
    out = integrate_upstream(geo, coef, cfg)
    new = MomentField.from_stacked(g, out)
    if cfg.pp and cfg.pp_moments:
        new = pp_limit(new)
    elif cfg.pp:
        check_averages(new.ubar)
    if dump is not None:
        for i in range(g.nx):
            for j in range(g.ny):
                cell = upstream_cell(geo.fx, geo.fy, i, j)
                dump.append(((i, j), dump_segments(clip_upstream(cell, g), cell)))
    return new


# ---------------------------------------------------------------- reference path

def _q_center(a, tp_coef, tp_center, x, y, xp, yq, grid: Grid, n: int = 6):
    """Q(x, y) = integral from the cell centre x_p to x of H w, by Gauss-Legendre in s."""
    t, w = np.polynomial.legendre.leggauss(n)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = 0.5 * (x[..., None] + xp) + 0.5 * (x[..., None] - xp) * t
    mu = (s - xp) / grid.dx
    nu = ((y - yq) / grid.dy)[..., None] + 0 * mu
    H = basis(mu, nu, 10) @ a
    if tp_coef is None:
        W = 1.0
    else:
        from .tracing import monomials

        W = monomials((s - tp_center[0]) / grid.dx, (y[..., None] - tp_center[1] + 0 * s) / grid.dy) @ tp_coef
    return 0.5 * (x - xp) * np.sum(w * H * W, axis=-1)


def integrate_clipped(clip, cell, coef: np.ndarray, wcen, wcoef, grid: Grid, n_gauss: int = 13):
    """Reference moments of one upstream cell from its full segment decomposition."""
    t, w = np.polynomial.legendre.leggauss(n_gauss)
    res = np.zeros(3)
    tests = [(None, None), (wcoef[0], wcen), (wcoef[1], wcen)]
    for seg in clip.outer + clip.inner:
        pq = wrap_cell(seg.cell, grid)
        if pq is None:
            continue
        a = coef[pq]
        xp = grid.x_lo + (seg.cell[0] + 0.5) * grid.dx
        yq = grid.y_lo + (seg.cell[1] + 0.5) * grid.dy
        if seg.kind == "outer":
            e = cell.edges[seg.edge]
            lo, hi = seg.xi
            s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t
            x, y = e(s)
            _, yp = e.derivative(s)
            jac = 0.5 * (hi - lo) * yp
        else:
            if seg.line[0] == "y":
                continue
            (X, ya), (_, yb) = seg.start, seg.end
            y = 0.5 * (ya + yb) + 0.5 * (yb - ya) * t
            x = np.full_like(y, X)
            jac = np.full_like(y, 0.5 * (yb - ya))
        for k, (tc, tcen) in enumerate(tests):
            res[k] += float(np.sum(w * jac * _q_center(a, tc, tcen, x, y, xp, yq, grid)))
    return res / (grid.dx * grid.dy)


def reference_update(mf: MomentField, vf: VelocityField, dt: float, cfg: StepConfig = StepConfig(),
                     t: float = 0.0) -> np.ndarray:
    """Cell-by-cell update through explicit clipping; slow, for verification."""
    g = mf.grid
    rf = recon_field(mf, cfg.recon)
    coef = limit_cubic(rf.coef) if cfg.pp else rf.coef
    geo = build_geometry(g, vf, t + dt, dt, cfg.n_sub)
    out = np.empty((g.nx, g.ny, 3))
    for i in range(g.nx):
        for j in range(g.ny):
            cell = upstream_cell(geo.fx, geo.fy, i, j)
            clip = clip_upstream(cell, g)
            out[i, j] = integrate_clipped(clip, cell, coef, geo.wcen[i, j], geo.wcoef[i, j], g,
                                          cfg.gauss_curved)
    return out
