"""Uniform Cartesian grid, P1 moment storage and the local orthogonal cubic basis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InitializationError

PERIODIC = "periodic"
ZERO = "zero_extension"
_BC_KINDS = (PERIODIC, ZERO)


@dataclass(frozen=True)
class Grid:
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    nx: int
    ny: int
    bc_x: str = PERIODIC
    bc_y: str = PERIODIC

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny or self.nx < 1 or self.ny < 1:
            raise ValueError(f"cell counts must be positive integers, got ({self.nx}, {self.ny})")
        if not (self.x_hi > self.x_lo and self.y_hi > self.y_lo):
            raise ValueError("domain bounds must satisfy x_hi > x_lo and y_hi > y_lo")
        for bc in (self.bc_x, self.bc_y):
            if bc not in _BC_KINDS:
                raise ValueError(f"unknown boundary kind {bc!r}; expected one of {_BC_KINDS}")

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_hi - self.y_lo) / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def area(self) -> float:
        return (self.x_hi - self.x_lo) * (self.y_hi - self.y_lo)

    @property
    def periodic_x(self) -> bool:
        return self.bc_x == PERIODIC

    @property
    def periodic_y(self) -> bool:
        return self.bc_y == PERIODIC

    # Faces are computed multiplicatively, never by accumulation.
    def x_faces(self) -> np.ndarray:
        return self.x_lo + np.arange(self.nx + 1) * self.dx

    def y_faces(self) -> np.ndarray:
        return self.y_lo + np.arange(self.ny + 1) * self.dy

    def x_centers(self) -> np.ndarray:
        return self.x_lo + (np.arange(self.nx) + 0.5) * self.dx

    def y_centers(self) -> np.ndarray:
        return self.y_lo + (np.arange(self.ny) + 0.5) * self.dy

    def refined(self, factor: int) -> "Grid":
        return Grid(self.x_lo, self.x_hi, self.y_lo, self.y_hi,
                    self.nx * factor, self.ny * factor, self.bc_x, self.bc_y)


@dataclass(frozen=True)
class MomentField:
    """Cell averages and first moments of the piecewise P1 solution.

    ``vbar`` is the moment against (x - x_i)/dx and ``wbar`` against
    (y - y_j)/dy, so the P1 function is ubar + 12 vbar mu + 12 wbar nu.
    """

    grid: Grid
    ubar: np.ndarray
    vbar: np.ndarray
    wbar: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("ubar", "vbar", "wbar"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != self.grid.shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {self.grid.shape}")
            object.__setattr__(self, name, arr)

    @classmethod
    def zeros(cls, grid: Grid) -> "MomentField":
        z = np.zeros(grid.shape)
        return cls(grid, z, z.copy(), z.copy())

    def stacked(self) -> np.ndarray:
        """Moments as an (nx, ny, 3) array."""
        return np.stack([self.ubar, self.vbar, self.wbar], axis=-1)

    @classmethod
    def from_stacked(cls, grid: Grid, arr: np.ndarray) -> "MomentField":
        return cls(grid, arr[..., 0].copy(), arr[..., 1].copy(), arr[..., 2].copy())

    def mass(self) -> float:
        return float(self.ubar.sum() * self.grid.dx * self.grid.dy)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.ubar).all() and np.isfinite(self.vbar).all()
                    and np.isfinite(self.wbar).all())


# Local orthogonal basis P_1..P_11 in the scaled coordinates mu, nu in [-1/2, 1/2].
def basis(mu, nu, count: int = 10) -> np.ndarray:
    """Evaluate the local basis; returns an array with a trailing axis of length ``count``."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    m2 = mu * mu - 1.0 / 12.0
    n2 = nu * nu - 1.0 / 12.0
    cols = [np.ones_like(mu + nu), mu + 0 * nu, nu + 0 * mu, m2 + 0 * nu, mu * nu, n2 + 0 * mu,
            mu ** 3 - 0.15 * mu + 0 * nu, m2 * nu, mu * n2, nu ** 3 - 0.15 * nu + 0 * mu, m2 * n2]
    return np.stack(cols[:count], axis=-1)


def gauss_legendre_unit(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes on [-1/2, 1/2] with weights summing to 1."""
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * t, 0.5 * w


def project_initial(grid: Grid, f, order: int = 5) -> MomentField:
    """Moments of a pointwise function by tensor Gauss-Legendre quadrature per cell.

    ``f`` must accept broadcast arrays ``f(x, y)``.
    """
    t, w = gauss_legendre_unit(order)
    xc = grid.x_centers()[:, None, None, None]
    yc = grid.y_centers()[None, :, None, None]
    mu = t[None, None, :, None]
    nu = t[None, None, None, :]
    vals = np.asarray(f(xc + mu * grid.dx, yc + nu * grid.dy), dtype=float)
    vals = np.broadcast_to(vals, (grid.nx, grid.ny, order, order))
    bad = ~np.isfinite(vals)
    if bad.any():
        i, j = np.argwhere(bad.any(axis=(2, 3)))[0]
        raise InitializationError(f"initial data is not finite in cell ({i}, {j})")
    ww = w[:, None] * w[None, :]
    ubar = np.einsum("ijab,ab->ij", vals, ww)
    vbar = np.einsum("ijab,ab,a->ij", vals, ww, t)
    wbar = np.einsum("ijab,ab,b->ij", vals, ww, t)
    return MomentField(grid, ubar, vbar, wbar)


def eval_p1(mf: MomentField, i: int, j: int, x, y):
    g = mf.grid
    mu = (np.asarray(x) - (g.x_lo + (i + 0.5) * g.dx)) / g.dx
    nu = (np.asarray(y) - (g.y_lo + (j + 0.5) * g.dy)) / g.dy
    return mf.ubar[i, j] + 12.0 * mf.vbar[i, j] * mu + 12.0 * mf.wbar[i, j] * nu


def pad(arr: np.ndarray, grid: Grid, width: int = 1) -> np.ndarray:
    """Pad the two leading axes with ghost cells per the grid's boundary kinds."""
    extra = [(0, 0)] * (arr.ndim - 2)
    out = np.pad(arr, [(width, width), (0, 0)] + extra,
                 mode="wrap" if grid.periodic_x else "constant")
    return np.pad(out, [(0, 0), (width, width)] + extra,
                  mode="wrap" if grid.periodic_y else "constant")


def neighbor_moments(mf: MomentField, i: int, j: int) -> np.ndarray:
    """The 3x3 stencil of (ubar, vbar, wbar) as a (9, 3) array.

    Row ``s - 1`` holds serial number ``s``: 1-3 is the row j-1 from left to
    right, 4-6 the row j and 7-9 the row j+1.
    """
    g = mf.grid
    out = np.zeros((9, 3))
    for s in range(9):
        p, q = i + s % 3 - 1, j + s // 3 - 1
        if not 0 <= p < g.nx:
            if not g.periodic_x:
                continue
            p %= g.nx
        if not 0 <= q < g.ny:
            if not g.periodic_y:
                continue
            q %= g.ny
        out[s] = mf.ubar[p, q], mf.vbar[p, q], mf.wbar[p, q]
    return out
