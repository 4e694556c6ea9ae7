"""Backward characteristic tracing, parametric cubic edges and test-function pullbacks.

Feet are traced once per node of a global lattice holding the 4x4 GLL points
of every cell, so neighbouring cells see bitwise-identical shared feet and
hence identical shared edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import GeometryDegeneracyError, TracingError
from .mesh import Grid

GLL4 = np.array([-1.0, -1.0 / math.sqrt(5.0), 1.0 / math.sqrt(5.0), 1.0])

# Rows map the 4 samples at GLL4 to (a, b, c, d) of a xi^3 + b xi^2 + c xi + d.
_VANDER = np.vander(GLL4, 4)
EDGE_FIT = np.linalg.inv(_VANDER)


@dataclass(frozen=True)
class VelocityField:
    """Evaluator of (a, b) at arbitrary points.

    ``a`` and ``b`` take ``(x, y, t)``. Fields built by :meth:`frozen_spectral`
    ignore ``t``; ``constant`` enables exact straight-line tracing and
    ``pair``, when given, evaluates both components in one call.
    """

    a: Callable
    b: Callable
    kind: str = "analytic"
    constant: Optional[tuple] = None
    pair: Optional[Callable] = None

    @classmethod
    def analytic(cls, a, b) -> "VelocityField":
        return cls(a, b)

    @classmethod
    def uniform(cls, a0: float, b0: float) -> "VelocityField":
        a0, b0 = float(a0), float(b0)
        return cls(lambda x, y, t: np.full(np.shape(x), a0),
                   lambda x, y, t: np.full(np.shape(y), b0),
                   kind="analytic", constant=(a0, b0))

    @classmethod
    def frozen_spectral(cls, a_xy, b_xy, ab_xy=None) -> "VelocityField":
        pair = None if ab_xy is None else (lambda x, y, t: ab_xy(x, y))
        return cls(lambda x, y, t: a_xy(x, y), lambda x, y, t: b_xy(x, y), kind="frozen_spectral", pair=pair)

    def __call__(self, x, y, t):
        if self.pair is not None:
            return self.pair(x, y, t)
        return self.a(x, y, t), self.b(x, y, t)

    def max_speeds(self, grid: Grid, t: float) -> tuple[float, float]:
        """Max |a| and |b| over the cell centres at time ``t``."""
        if self.constant is not None:
            return abs(self.constant[0]), abs(self.constant[1])
        X, Y = np.meshgrid(grid.x_centers(), grid.y_centers(), indexing="ij")
        a, b = self(X, Y, t)
        return float(np.max(np.abs(a))), float(np.max(np.abs(b)))


@dataclass(frozen=True)
class CubicEdge:
    """x(xi) = xa xi^3 + xb xi^2 + xc xi + xd on xi in [-1, 1], same for y."""

    cx: np.ndarray
    cy: np.ndarray

    def __call__(self, xi):
        return np.polyval(self.cx, xi), np.polyval(self.cy, xi)

    def derivative(self, xi):
        return np.polyval(np.polyder(self.cx), xi), np.polyval(np.polyder(self.cy), xi)

    def reversed(self) -> "CubicEdge":
        flip = np.array([-1.0, 1.0, -1.0, 1.0])
        return CubicEdge(self.cx * flip, self.cy * flip)

    def is_affine(self, scale: float) -> bool:
        return max(abs(self.cx[0]), abs(self.cx[1]), abs(self.cy[0]), abs(self.cy[1])) <= 1e-14 * scale


@dataclass(frozen=True)
class TestPoly:
    """Cubic in X = (x - xc)/dx, Y = (y - yc)/dy over monomials
    1, X, Y, X^2, XY, Y^2, X^3, X^2 Y, X Y^2, Y^3."""

    center: tuple
    scale: tuple
    coef: np.ndarray

    def __call__(self, x, y):
        X = (np.asarray(x) - self.center[0]) / self.scale[0]
        Y = (np.asarray(y) - self.center[1]) / self.scale[1]
        return np.einsum("...k,k->...", monomials(X, Y), self.coef)


def monomials(X, Y) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return np.stack([np.ones_like(X + Y), X + 0 * Y, Y + 0 * X, X * X + 0 * Y, X * Y, Y * Y + 0 * X,
                     X ** 3 + 0 * Y, X * X * Y, X * Y * Y, Y ** 3 + 0 * X], axis=-1)


@dataclass(frozen=True)
class UpstreamCell:
    index: tuple
    feet: np.ndarray  # (4, 4, 2), feet[g, h] is the foot of GLL point (g, h)
    edges: tuple  # bottom, right, top, left, each running counterclockwise

    @property
    def bbox(self):
        xi = np.linspace(-1, 1, 65)
        pts = np.concatenate([np.stack(e(xi), axis=-1) for e in self.edges])
        return pts[:, 0].min(), pts[:, 0].max(), pts[:, 1].min(), pts[:, 1].max()

    def signed_area(self) -> float:
        """Area by Gauss quadrature of x dy along the boundary (exact for cubic edges)."""
        t, w = np.polynomial.legendre.leggauss(8)
        total = 0.0
        for e in self.edges:
            x, _ = e(t)
            _, yp = e.derivative(t)
            total += float(np.sum(w * x * yp))
        return total


def gll_points_4(grid: Grid, i: int, j: int) -> np.ndarray:
    """The 16 GLL points of cell (i, j) as a (4, 4, 2) array indexed [g, h]."""
    xc = grid.x_lo + (i + 0.5) * grid.dx
    yc = grid.y_lo + (j + 0.5) * grid.dy
    X, Y = np.meshgrid(xc + 0.5 * GLL4 * grid.dx, yc + 0.5 * GLL4 * grid.dy, indexing="ij")
    return np.stack([X, Y], axis=-1)


def lattice_coords(n: int, lo: float, h: float) -> np.ndarray:
    """Coordinates of the 3n + 1 shared GLL nodes along one axis."""
    k = np.arange(3 * n + 1)
    cell = np.minimum(k // 3, n - 1)
    g = k - 3 * cell
    return lo + (cell + 0.5 * (1.0 + GLL4[g])) * h


def trace_feet(x, y, vf: VelocityField, t_end: float, dt: float, n_sub: int = 1):
    """Classical RK4 from t_end back to t_end - dt in ``n_sub`` substeps."""
    if not dt > 0:
        raise ValueError("trace step must be positive")
    x = np.array(x, dtype=float)
    y = np.array(y, dtype=float)
    if vf.constant is not None:
        fx, fy = x - vf.constant[0] * dt, y - vf.constant[1] * dt
    else:
        n_sub = 1 if n_sub is None else max(1, int(n_sub))
        h = -dt / n_sub
        fx, fy = x, y
        for s in range(n_sub):
            t = t_end + s * h
            a1, b1 = vf(fx, fy, t)
            a2, b2 = vf(fx + 0.5 * h * a1, fy + 0.5 * h * b1, t + 0.5 * h)
            a3, b3 = vf(fx + 0.5 * h * a2, fy + 0.5 * h * b2, t + 0.5 * h)
            a4, b4 = vf(fx + h * a3, fy + h * b3, t + h)
            fx = fx + h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
            fy = fy + h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
    bad = ~(np.isfinite(fx) & np.isfinite(fy))
    if bad.any():
        k = tuple(int(v) for v in np.argwhere(bad)[0])
        raise TracingError(f"foot of point {k} at ({x[k]}, {y[k]}) is not finite")
    return fx, fy


def trace_lattice(grid: Grid, vf: VelocityField, t_end: float, dt: float, n_sub: int = 1):
    """Feet of the whole (3nx+1) x (3ny+1) lattice; periodic seams are copied exactly."""
    X, Y = np.meshgrid(lattice_coords(grid.nx, grid.x_lo, grid.dx),
                       lattice_coords(grid.ny, grid.y_lo, grid.dy), indexing="ij")
    sx = slice(None, -1) if grid.periodic_x else slice(None)
    sy = slice(None, -1) if grid.periodic_y else slice(None)
    fx = np.empty_like(X)
    fy = np.empty_like(Y)
    fx[sx, sy], fy[sx, sy] = trace_feet(X[sx, sy], Y[sx, sy], vf, t_end, dt, n_sub)
    Lx = grid.x_hi - grid.x_lo
    Ly = grid.y_hi - grid.y_lo
    if grid.periodic_x:
        fx[-1, sy] = fx[0, sy] + Lx
        fy[-1, sy] = fy[0, sy]
    if grid.periodic_y:
        fx[:, -1] = fx[:, 0]
        fy[:, -1] = fy[:, 0] + Ly
        if grid.periodic_x:
            fx[-1, -1] = fx[0, 0] + Lx
    return fx, fy


def fit_edges(feet: np.ndarray) -> tuple:
    """Four counterclockwise cubic edges from a (4, 4, 2) array of feet."""
    def fit(pts):
        return CubicEdge(EDGE_FIT @ pts[:, 0], EDGE_FIT @ pts[:, 1])

    bottom = fit(feet[:, 0])
    right = fit(feet[3, :])
    top = fit(feet[:, 3]).reversed()
    left = fit(feet[0, :]).reversed()
    return bottom, right, top, left


def lattice_edges(fx: np.ndarray, fy: np.ndarray, grid: Grid):
    """Cubic coefficients of every global edge.

    Returns (hx, hy, vx, vy): horizontal edges have shape (nx, ny+1, 4) and
    run in +x, vertical edges have shape (nx+1, ny, 4) and run in +y.
    """
    nx, ny = grid.shape
    gx = 3 * np.arange(nx)[:, None] + np.arange(4)[None, :]
    hx = np.einsum("kg,igJ->iJk", EDGE_FIT, fx[gx][:, :, ::3])
    hy = np.einsum("kg,igJ->iJk", EDGE_FIT, fy[gx][:, :, ::3])
    gy = 3 * np.arange(ny)[:, None] + np.arange(4)[None, :]
    vx = np.einsum("kg,Ijg->Ijk", EDGE_FIT, fx[::3][:, gy])
    vy = np.einsum("kg,Ijg->Ijk", EDGE_FIT, fy[::3][:, gy])
    return hx, hy, vx, vy


def cell_feet(fx: np.ndarray, fy: np.ndarray, i: int, j: int) -> np.ndarray:
    sl_x = slice(3 * i, 3 * i + 4)
    sl_y = slice(3 * j, 3 * j + 4)
    return np.stack([fx[sl_x, sl_y], fy[sl_x, sl_y]], axis=-1)


def upstream_cell(fx, fy, i: int, j: int) -> UpstreamCell:
    feet = cell_feet(fx, fy, i, j)
    return UpstreamCell((i, j), feet, fit_edges(feet))


def fit_test_poly(W_values, feet, scale) -> TestPoly:
    """Least-squares cubic w with w(foot_k) = W(point_k), in centred-scaled coordinates."""
    feet = np.asarray(feet, dtype=float).reshape(-1, 2)
    W_values = np.asarray(W_values, dtype=float).reshape(-1)
    center = feet.mean(axis=0)
    M = monomials((feet[:, 0] - center[0]) / scale[0], (feet[:, 1] - center[1]) / scale[1])
    Q, R = np.linalg.qr(M)
    d = np.abs(np.diag(R))
    if d.min() < 1e-10 * d.max():
        raise GeometryDegeneracyError("upstream feet do not determine a cubic")
    coef = np.linalg.solve(R, Q.T @ W_values)
    return TestPoly((float(center[0]), float(center[1])), (float(scale[0]), float(scale[1])), coef)


def fit_test_polys(fx: np.ndarray, fy: np.ndarray, grid: Grid):
    """Test polynomials for W = mu and W = nu on every cell.

    Returns centres (nx, ny, 2) and coefficients (nx, ny, 2, 10). W = 1 pulls
    back to the constant 1 exactly and is not fitted.
    """
    nx, ny = grid.shape
    ix = 3 * np.arange(nx)[:, None] + np.arange(4)[None, :]
    iy = 3 * np.arange(ny)[:, None] + np.arange(4)[None, :]
    FX = fx[ix[:, None, :, None], iy[None, :, None, :]]  # (nx, ny, 4, 4)
    FY = fy[ix[:, None, :, None], iy[None, :, None, :]]
    cx = FX.mean(axis=(2, 3))
    cy = FY.mean(axis=(2, 3))
    M = monomials((FX - cx[..., None, None]) / grid.dx, (FY - cy[..., None, None]) / grid.dy)
    M = M.reshape(nx * ny, 16, 10)
    Q, R = np.linalg.qr(M)
    d = np.abs(np.diagonal(R, axis1=-2, axis2=-1))
    bad = d < 1e-10 * d.max(axis=-1, keepdims=True)
    if bad.any():
        k = int(np.argwhere(bad.any(axis=-1))[0][0])
        raise GeometryDegeneracyError(f"upstream feet of cell {divmod(k, ny)} do not determine a cubic")
    mu = np.repeat(0.5 * GLL4, 4)
    nu = np.tile(0.5 * GLL4, 4)
    rhs = np.einsum("nkl,kw->nlw", Q, np.stack([mu, nu], axis=-1))
    coef = np.linalg.solve(R, rhs)  # (n, 10, 2)
    coef = np.moveaxis(coef, -1, -2).reshape(nx, ny, 2, 10)
    return np.stack([cx, cy], axis=-1), coef
