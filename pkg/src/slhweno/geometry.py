"""Intersections of cubic upstream edges with the Eulerian mesh and clipping.

The production path splits every global edge once at its mesh-line crossings
(:func:`edge_pieces`); the cell integrator then only needs those outer pieces.
:func:`clip_upstream` builds the full per-cell decomposition, inner segments
included, and backs the reference integrator and the debug dump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit, prange

from .errors import GeometryError
from .mesh import Grid
from .tracing import CubicEdge, UpstreamCell

TOL_XI = 1e-12
_MAX_ITER = 200


@njit(cache=True)
def _cubic(c, t):
    return ((c[0] * t + c[1]) * t + c[2]) * t + c[3]


@njit(cache=True)
def _dcubic(c, t):
    return (3.0 * c[0] * t + 2.0 * c[1]) * t + c[2]


@njit(cache=True)
def _critical(c):
    """Critical points of the cubic inside (-1, 1), in order; 2.0 marks absent ones."""
    A = 3.0 * c[0]
    B = 2.0 * c[1]
    C = c[2]
    r1 = 2.0
    r2 = 2.0
    if A != 0.0:
        disc = B * B - 4.0 * A * C
        if disc >= 0.0:
            s = math.sqrt(disc)
            qq = -0.5 * (B + math.copysign(s, B))
            if qq != 0.0:
                r1 = qq / A
                r2 = C / qq
            else:
                r1 = -B / (2.0 * A)
                r2 = r1
    elif B != 0.0:
        r1 = -C / B
    if not -1.0 < r1 < 1.0:
        r1 = 2.0
    if not -1.0 < r2 < 1.0 or r2 == r1:
        r2 = 2.0
    if r1 > r2:
        r1, r2 = r2, r1
    return r1, r2


@njit(cache=True)
def _solve_monotone(c, level, ta, tb, ga, gb):
    """Root of cubic(c) - level in (ta, tb) given a sign change; Newton with bisection fallback."""
    t = ta - ga * (tb - ta) / (gb - ga)
    if not ta < t < tb:
        t = 0.5 * (ta + tb)
    for _ in range(_MAX_ITER):
        g = _cubic(c, t) - level
        if g == 0.0:
            return t, True
        if (g > 0.0) == (ga > 0.0):
            ta = t
            ga = g
        else:
            tb = t
            gb = g
        if tb - ta <= 4e-16:
            return 0.5 * (ta + tb), True
        d = _dcubic(c, t)
        tn = t - g / d if d != 0.0 else 2.0
        if ta < tn < tb:
            if abs(tn - t) <= 1e-16:
                return tn, True
            t = tn
        else:
            t = 0.5 * (ta + tb)
    return t, False


@njit(cache=True)
def _line_span(lo_v, hi_v, origin, h):
    k0 = int(math.floor((lo_v - origin) / h)) - 1
    k1 = int(math.ceil((hi_v - origin) / h)) + 1
    return k0, k1


@njit(cache=True)
def _axis_crossings(c, origin, h, tol, out, n, fill):
    """Append (or, if not ``fill``, only count) crossings of c(xi) with origin + k h."""
    r1, r2 = _critical(c)
    nb = 2 + (r1 < 2.0) + (r2 < 2.0)
    ok = True
    for s in range(nb - 1):
        if s == 0:
            ta = -1.0
        elif s == 1:
            ta = r1
        else:
            ta = r2
        if s == nb - 2:
            tb = 1.0
        elif s == 0:
            tb = r1
        else:
            tb = r2
        fa = _cubic(c, ta)
        fb = _cubic(c, tb)
        lo_v = min(fa, fb)
        hi_v = max(fa, fb)
        k0, k1 = _line_span(lo_v, hi_v, origin, h)
        for k in range(k0, k1 + 1):
            level = origin + k * h
            if lo_v < level < hi_v:
                if fill:
                    t, conv = _solve_monotone(c, level, ta, tb, fa - level, fb - level)
                    if not conv:
                        ok = False
                    out[n] = t
                n += 1
        if s > 0:
            # interior critical point touching a line counts as a tangency
            fc = fa
            k = int(round((fc - origin) / h))
            if abs(fc - (origin + k * h)) <= tol:
                if fill:
                    out[n] = ta
                n += 1
    return n, ok


@njit(cache=True)
def edge_crossing_bound(cx, cy, x_lo, dx, y_lo, dy):
    tol = TOL_XI * max(dx, dy)
    dummy = np.empty(1)
    nx_, _ = _axis_crossings(cx, x_lo, dx, tol, dummy, 0, False)
    ny_, _ = _axis_crossings(cy, y_lo, dy, tol, dummy, 0, False)
    return nx_ + ny_


@njit(cache=True)
def _sorted_unique(buf, n):
    s = np.sort(buf[:n])
    m = 0
    for k in range(n):
        if m == 0 or s[k] - s[m - 1] > TOL_XI:
            s[m] = s[k]
            m += 1
    return s[:m]


@njit(cache=True)
def _fill_edge(cx, cy, x_lo, dx, y_lo, dy, ta_out, tb_out, p_out, q_out, start, cap):
    tol = TOL_XI * max(dx, dy)
    buf = np.empty(cap + 2)
    n, ok1 = _axis_crossings(cx, x_lo, dx, tol, buf, 0, True)
    n, ok2 = _axis_crossings(cy, y_lo, dy, tol, buf, n, True)
    roots = _sorted_unique(buf, n)
    m = 0
    prev = -1.0
    for k in range(roots.shape[0] + 1):
        nxt = roots[k] if k < roots.shape[0] else 1.0
        if k < roots.shape[0] and (nxt - prev <= TOL_XI or 1.0 - nxt <= TOL_XI):
            continue
        tm = 0.5 * (prev + nxt)
        ta_out[start + m] = prev
        tb_out[start + m] = nxt
        p_out[start + m] = int(math.floor((_cubic(cx, tm) - x_lo) / dx))
        q_out[start + m] = int(math.floor((_cubic(cy, tm) - y_lo) / dy))
        m += 1
        prev = nxt
    return m, ok1 and ok2


@njit(cache=True, parallel=True)
def _all_bounds(ex, ey, x_lo, dx, y_lo, dy):
    E = ex.shape[0]
    out = np.empty(E, dtype=np.int64)
    for e in prange(E):
        out[e] = edge_crossing_bound(ex[e], ey[e], x_lo, dx, y_lo, dy) + 1
    return out


@njit(cache=True, parallel=True)
def _all_fill(ex, ey, x_lo, dx, y_lo, dy, offsets, ta, tb, pp, qq, counts, status):
    E = ex.shape[0]
    for e in prange(E):
        cap = offsets[e + 1] - offsets[e]
        m, ok = _fill_edge(ex[e], ey[e], x_lo, dx, y_lo, dy, ta, tb, pp, qq, offsets[e], cap)
        counts[e] = m
        status[e] = 1 if ok else 0


class EdgePieces(NamedTuple):
    """Compressed rows of outer pieces, one row per edge."""

    offsets: np.ndarray
    ta: np.ndarray
    tb: np.ndarray
    p: np.ndarray
    q: np.ndarray


def edge_pieces(ex: np.ndarray, ey: np.ndarray, grid: Grid) -> EdgePieces:
    """Split edges with coefficients ``ex, ey`` (E, 4) at all mesh-line crossings.

    Each piece carries the unwrapped background cell of its parameter midpoint.
    """
    ex = np.ascontiguousarray(ex, dtype=float).reshape(-1, 4)
    ey = np.ascontiguousarray(ey, dtype=float).reshape(-1, 4)
    bound = _all_bounds(ex, ey, grid.x_lo, grid.dx, grid.y_lo, grid.dy)
    offsets = np.zeros(bound.size + 1, dtype=np.int64)
    np.cumsum(bound, out=offsets[1:])
    total = int(offsets[-1])
    ta = np.empty(total)
    tb = np.empty(total)
    pp = np.empty(total, dtype=np.int64)
    qq = np.empty(total, dtype=np.int64)
    counts = np.empty(bound.size, dtype=np.int64)
    status = np.empty(bound.size, dtype=np.int64)
    _all_fill(ex, ey, grid.x_lo, grid.dx, grid.y_lo, grid.dy, offsets, ta, tb, pp, qq, counts, status)
    if not status.all():
        raise GeometryError(f"root finder did not converge on edge {int(np.argmin(status))}")
    keep = (np.arange(total) - np.repeat(offsets[:-1], bound)) < np.repeat(counts, bound)
    new_off = np.zeros_like(offsets)
    np.cumsum(counts, out=new_off[1:])
    return EdgePieces(new_off, ta[keep], tb[keep], pp[keep], qq[keep])


@dataclass(frozen=True)
class IntersectionPoint:
    edge: int
    xi: float
    line: tuple  # ("x", k) for x = x_lo + k dx, ("y", k) likewise
    point: tuple


def edge_mesh_intersections(edge: CubicEdge, grid: Grid, edge_id: int = 0) -> list:
    """All crossings of one edge with mesh lines, sorted by xi."""
    cx = np.asarray(edge.cx, dtype=float)
    cy = np.asarray(edge.cy, dtype=float)
    if not (np.isfinite(cx).all() and np.isfinite(cy).all()):
        raise GeometryError(f"edge {edge_id} has non-finite coefficients")
    tol = TOL_XI * max(grid.dx, grid.dy)
    found = []
    for axis, c, origin, h in (("x", cx, grid.x_lo, grid.dx), ("y", cy, grid.y_lo, grid.dy)):
        bound, _ = _axis_crossings(c, origin, h, tol, np.empty(1), 0, False)
        buf = np.empty(bound + 1)
        n, ok = _axis_crossings(c, origin, h, tol, buf, 0, True)
        if not ok:
            raise GeometryError(f"root finder did not converge on edge {edge_id}")
        for t in buf[:n]:
            k = int(round((np.polyval(c, t) - origin) / h))
            found.append((float(t), (axis, k)))
    found.sort(key=lambda r: r[0])
    out = []
    for t, line in found:
        if out and abs(t - out[-1].xi) <= TOL_XI and out[-1].line == line:
            continue
        x, y = edge(t)
        out.append(IntersectionPoint(edge_id, t, line, (float(x), float(y))))
    return out


@dataclass(frozen=True)
class IntegralSegment:
    """Outer: piece of edge ``edge`` over ``xi``. Inner: piece of mesh line
    ``line`` from ``start`` to ``end`` (the oriented direction)."""

    kind: str
    cell: tuple
    edge: int = -1
    xi: tuple = ()
    line: tuple = ()
    start: tuple = ()
    end: tuple = ()
    sign: int = 1


class ClipResult(NamedTuple):
    outer: list
    inner: list
    cells: set


def _winding(poly: np.ndarray, x: float, y: float) -> int:
    wn = 0
    x0, y0 = poly[:-1, 0], poly[:-1, 1]
    x1, y1 = poly[1:, 0], poly[1:, 1]
    cross = (x1 - x0) * (y - y0) - (x - x0) * (y1 - y0)
    up = (y0 <= y) & (y1 > y) & (cross > 0)
    down = (y0 > y) & (y1 <= y) & (cross < 0)
    wn = int(up.sum() - down.sum())
    return wn


def _interior_both_sides(poly, x, y, ox, oy) -> bool:
    return _winding(poly, x - ox, y - oy) != 0 and _winding(poly, x + ox, y + oy) != 0


def _classify(edge: CubicEdge, tm: float, grid: Grid, half: float):
    """Background cell of a point on an edge; near-line cases use the interior side."""
    h_tol = TOL_XI * max(grid.dx, grid.dy)
    out = []
    for axis, origin, h in ((0, grid.x_lo, grid.dx), (1, grid.y_lo, grid.dy)):
        val = edge(tm)[axis]
        r = (val - origin) / h
        k = int(round(r))
        if abs(val - (origin + k * h)) > h_tol:
            out.append(int(math.floor(r)))
            continue
        # perturb the midpoint once, then fall back to the interior side
        shifted = edge(tm + 0.5 * half)[axis]
        if abs(shifted - (origin + k * h)) > h_tol:
            out.append(int(math.floor((shifted - origin) / h)))
            continue
        dx_, dy_ = edge.derivative(tm)
        inward = -dy_ if axis == 0 else dx_
        out.append(k if inward > 0 else k - 1)
    return tuple(out)


def clip_upstream(cell: UpstreamCell, grid: Grid, samples: int = 64) -> ClipResult:
    """Outer and inner segments of the upstream cell with their background cells.

    Cells are unwrapped indices; use :func:`wrap_cell` to map them into the grid.
    """
    outer = []
    crossings = {}
    for k, e in enumerate(cell.edges):
        pts = edge_mesh_intersections(e, grid, k)
        for ip in pts:
            crossings.setdefault(ip.line, []).append(ip.point)
        cuts = [-1.0] + [ip.xi for ip in pts if -1.0 + TOL_XI < ip.xi < 1.0 - TOL_XI] + [1.0]
        cuts = sorted(set(cuts))
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b - a <= TOL_XI:
                continue
            pq = _classify(e, 0.5 * (a + b), grid, 0.5 * (b - a))
            outer.append(IntegralSegment("outer", pq, edge=k, xi=(a, b)))

    ts = np.linspace(-1.0, 1.0, samples + 1)
    poly = np.concatenate([np.stack(e(ts[:-1]), axis=-1) for e in cell.edges])
    poly = np.vstack([poly, poly[:1]])
    xmin, xmax = poly[:, 0].min(), poly[:, 0].max()
    ymin, ymax = poly[:, 1].min(), poly[:, 1].max()
    inner = []
    side = 1e-6  # probe offset; a mesh-line piece lying on an edge is not inner
    kx0 = int(math.floor((xmin - grid.x_lo) / grid.dx))
    kx1 = int(math.ceil((xmax - grid.x_lo) / grid.dx))
    ky0 = int(math.floor((ymin - grid.y_lo) / grid.dy))
    ky1 = int(math.ceil((ymax - grid.y_lo) / grid.dy))
    for k in range(kx0, kx1 + 1):
        X = grid.x_lo + k * grid.dx
        ys = [pt[1] for pt in crossings.get(("x", k), [])]
        ys += [grid.y_lo + m * grid.dy for m in range(ky0, ky1 + 1)]
        ys = sorted(set(ys))
        for a, b in zip(ys[:-1], ys[1:]):
            if b - a <= TOL_XI * grid.dy:
                continue
            ym = 0.5 * (a + b)
            if not _interior_both_sides(poly, X, ym, side * grid.dx, 0.0):
                continue
            m = int(math.floor((ym - grid.y_lo) / grid.dy))
            inner.append(IntegralSegment("inner", (k - 1, m), line=("x", k), start=(X, a), end=(X, b)))
            inner.append(IntegralSegment("inner", (k, m), line=("x", k), start=(X, b), end=(X, a)))
    for m in range(ky0, ky1 + 1):
        Y = grid.y_lo + m * grid.dy
        xs = [pt[0] for pt in crossings.get(("y", m), [])]
        xs += [grid.x_lo + k * grid.dx for k in range(kx0, kx1 + 1)]
        xs = sorted(set(xs))
        for a, b in zip(xs[:-1], xs[1:]):
            if b - a <= TOL_XI * grid.dx:
                continue
            xm = 0.5 * (a + b)
            if not _interior_both_sides(poly, xm, Y, 0.0, side * grid.dy):
                continue
            k = int(math.floor((xm - grid.x_lo) / grid.dx))
            inner.append(IntegralSegment("inner", (k, m - 1), line=("y", m), start=(b, Y), end=(a, Y)))
            inner.append(IntegralSegment("inner", (k, m), line=("y", m), start=(a, Y), end=(b, Y)))
    cells = {s.cell for s in outer} | {s.cell for s in inner}
    return ClipResult(outer, inner, cells)


def wrap_cell(pq, grid: Grid):
    """Map an unwrapped background cell into the grid, or None if it lies outside."""
    p, q = pq
    if grid.periodic_x:
        p %= grid.nx
    elif not 0 <= p < grid.nx:
        return None
    if grid.periodic_y:
        q %= grid.ny
    elif not 0 <= q < grid.ny:
        return None
    return p, q


def segment_endpoints(seg: IntegralSegment, cell: UpstreamCell):
    if seg.kind == "outer":
        e = cell.edges[seg.edge]
        a = e(seg.xi[0])
        b = e(seg.xi[1])
        return (float(a[0]), float(a[1])), (float(b[0]), float(b[1]))
    return seg.start, seg.end


def dump_segments(clip: ClipResult, cell: UpstreamCell) -> str:
    """One line per segment: kind, background cell, start and end points."""
    lines = []
    for seg in clip.outer + clip.inner:
        (xa, ya), (xb, yb) = segment_endpoints(seg, cell)
        tag = f"edge={seg.edge}" if seg.kind == "outer" else f"line={seg.line[0]}{seg.line[1]}"
        lines.append(f"{seg.kind} cell={seg.cell[0]},{seg.cell[1]} {tag} "
                     f"start={xa:.17g},{ya:.17g} end={xb:.17g},{yb:.17g}")
    return "\n".join(lines) + ("\n" if lines else "")


def piece_area(clip: ClipResult, cell: UpstreamCell, pq, n_gauss: int = 8) -> float:
    """Area of the curved polygon in background cell ``pq`` from its own boundary loop."""
    t, w = np.polynomial.legendre.leggauss(n_gauss)
    total = 0.0
    for seg in clip.outer:
        if seg.cell != pq:
            continue
        e = cell.edges[seg.edge]
        a, b = seg.xi
        s = 0.5 * (a + b) + 0.5 * (b - a) * t
        x, _ = e(s)
        _, yp = e.derivative(s)
        total += 0.5 * (b - a) * float(np.sum(w * x * yp))
    for seg in clip.inner:
        if seg.cell != pq:
            continue
        (xa, ya), (xb, yb) = seg.start, seg.end
        total += 0.5 * (xa + xb) * (yb - ya)
    return total
