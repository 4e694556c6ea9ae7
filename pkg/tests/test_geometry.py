import math

import numpy as np
import pytest

from slhweno.errors import GeometryError
from slhweno.geometry import (clip_upstream, dump_segments, edge_mesh_intersections, edge_pieces,
                              piece_area, segment_endpoints, wrap_cell)
from slhweno.mesh import Grid
from slhweno.tracing import CubicEdge, VelocityField, lattice_edges, trace_lattice, upstream_cell

G = Grid(0.0, 4.0, 0.0, 4.0, 4, 4)  # dx = dy = 1
ROTATION = VelocityField.analytic(lambda x, y, t: -(y - 2.0), lambda x, y, t: x - 2.0)


def _line(p0, p1):
    (x0, y0), (x1, y1) = p0, p1
    return CubicEdge(np.array([0, 0, 0.5 * (x1 - x0), 0.5 * (x0 + x1)]),
                     np.array([0, 0, 0.5 * (y1 - y0), 0.5 * (y0 + y1)]))


def _cell(vf, dt, i, j, n_sub=4, grid=G):
    fx, fy = trace_lattice(grid, vf, 0.0, dt, n_sub)
    return upstream_cell(fx, fy, i, j)


def test_affine_edge_crossing_closed_form():
    hits = edge_mesh_intersections(_line((0.2, 0.5), (1.3, 0.5)), G)
    assert len(hits) == 1
    assert hits[0].line == ("x", 1)
    # x(xi) = 0.75 + 0.55 xi = 1
    assert hits[0].xi == pytest.approx(0.25 / 0.55, abs=1e-15)
    assert abs(hits[0].point[0] - 1.0) <= 1e-12


def test_edge_inside_one_cell_has_no_crossings():
    assert edge_mesh_intersections(_line((1.2, 1.3), (1.8, 1.6)), G) == []


def test_tangent_edge_reports_one_crossing():
    # y(xi) = 2 + 0.3 xi^2 touches y = 2 at xi = 0 only
    e = CubicEdge(np.array([0, 0, 0.4, 1.5]), np.array([0, 0.3, 0, 2.0]))
    hits = edge_mesh_intersections(e, G)
    assert [h.line for h in hits] == [("y", 2)]
    assert abs(hits[0].xi) < 1e-6


def test_crossings_sorted_and_on_lines():
    e = CubicEdge(np.array([0.5, 0.2, 1.4, 2.0]), np.array([-0.6, 0.1, 1.3, 2.1]))
    hits = edge_mesh_intersections(e, G)
    xis = [h.xi for h in hits]
    assert xis == sorted(xis)
    for h in hits:
        axis = 0 if h.line[0] == "x" else 1
        assert abs(h.point[axis] - h.line[1]) <= 1e-12


def test_nonfinite_edge_raises():
    with pytest.raises(GeometryError):
        edge_mesh_intersections(CubicEdge(np.array([np.nan, 0, 0, 0]), np.zeros(4)), G)


def test_zero_velocity_clip_has_only_outer_segments():
    cell = _cell(VelocityField.uniform(0.0, 0.0), 1.0, 1, 2)
    clip = clip_upstream(cell, G)
    assert clip.inner == []
    assert len(clip.outer) == 4
    assert clip.cells == {(1, 2)}


def test_half_cell_shift_clip():
    cell = _cell(VelocityField.uniform(0.5, 0.0), 1.0, 2, 1)  # cell [1.5, 2.5] x [1, 2]
    clip = clip_upstream(cell, G)
    assert clip.cells == {(1, 1), (2, 1)}
    assert {s.line for s in clip.inner} == {("x", 2)}
    assert len(clip.inner) == 2 and {s.cell for s in clip.inner} == {(1, 1), (2, 1)}
    bottom = sorted(s.xi for s in clip.outer if s.edge == 0)
    assert bottom == [(-1.0, 0.0), (0.0, 1.0)]
    for pq in clip.cells:
        assert piece_area(clip, cell, pq) == pytest.approx(0.5, abs=1e-14)


@pytest.mark.parametrize("dt", [0.3, 0.9])
def test_area_additivity_for_rotated_cells(dt):
    g = Grid(0.0, 4.0, 0.0, 4.0, 8, 8)
    fx, fy = trace_lattice(g, ROTATION, 0.0, dt, 8)
    for i, j in ((1, 1), (5, 2), (3, 6)):
        cell = upstream_cell(fx, fy, i, j)
        clip = clip_upstream(cell, g)
        total = sum(piece_area(clip, cell, pq) for pq in clip.cells)
        assert abs(total - cell.signed_area()) <= 1e-12 * g.dx * g.dy
        assert all(piece_area(clip, cell, pq) > -1e-14 for pq in clip.cells)


def test_area_matches_dense_sampling():
    cell = _cell(ROTATION, 0.7, 0, 3)
    xi = np.linspace(-1, 1, 20001)
    total = 0.0
    for e in cell.edges:
        x, y = e(xi)
        total += np.trapezoid(x * np.gradient(y, xi), xi)
    clip = clip_upstream(cell, G)
    assert sum(piece_area(clip, cell, pq) for pq in clip.cells) == pytest.approx(total, rel=1e-7)


def test_outer_segments_partition_each_edge():
    cell = _cell(ROTATION, 0.8, 3, 0)
    clip = clip_upstream(cell, G)
    for k in range(4):
        iv = sorted(s.xi for s in clip.outer if s.edge == k)
        assert iv[0][0] == -1.0 and iv[-1][1] == 1.0
        for (a, b), (c, d) in zip(iv[:-1], iv[1:]):
            assert b == c


def test_each_piece_boundary_closes():
    cell = _cell(ROTATION, 0.8, 2, 2)
    clip = clip_upstream(cell, G)
    for pq in clip.cells:
        segs = [s for s in clip.outer + clip.inner if s.cell == pq]
        net = np.zeros(2)
        for s in segs:
            a, b = segment_endpoints(s, cell)
            net += np.subtract(b, a)
        assert np.abs(net).max() < 1e-12


def test_inner_segments_cancel_over_the_mesh():
    # integral of a smooth Q along inner pieces, summed over every upstream cell
    fx, fy = trace_lattice(G, ROTATION, 0.0, 0.6, 6)
    Q = lambda x, y: np.sin(x) * np.cos(1.3 * y) + x * y
    t, w = np.polynomial.legendre.leggauss(6)
    total = 0.0
    scale = 0.0
    for i in range(G.nx):
        for j in range(G.ny):
            cell = upstream_cell(fx, fy, i, j)
            for s in clip_upstream(cell, G).inner:
                (xa, ya), (xb, yb) = s.start, s.end
                x = 0.5 * (xa + xb) + 0.5 * (xb - xa) * t
                y = 0.5 * (ya + yb) + 0.5 * (yb - ya) * t
                v = 0.5 * (yb - ya) * np.sum(w * Q(x, y))
                total += v
                scale += abs(v)
    assert scale > 0
    assert abs(total) < 1e-13 * scale


def test_dump_format():
    cell = _cell(VelocityField.uniform(0.5, 0.0), 1.0, 2, 1)
    clip = clip_upstream(cell, G)
    lines = dump_segments(clip, cell).splitlines()
    assert len(lines) == len(clip.outer) + len(clip.inner)
    first = lines[0].split()
    assert first[0] == "outer" and first[1].startswith("cell=") and first[2] == "edge=0"
    assert any(line.startswith("inner") and "line=x2" in line for line in lines)
    start = [float(v) for v in first[3].removeprefix("start=").split(",")]
    assert start == pytest.approx([1.5, 1.0], abs=1e-14)


def test_wrap_cell():
    gp = Grid(0, 4, 0, 4, 4, 4, "periodic", "zero_extension")
    assert wrap_cell((-1, 2), gp) == (3, 2)
    assert wrap_cell((1, 4), gp) is None


def test_edge_pieces_cover_global_edges():
    g = Grid(0.0, 4.0, 0.0, 4.0, 4, 4)
    fx, fy = trace_lattice(g, ROTATION, 0.0, 0.5, 4)
    hx, hy, vx, vy = lattice_edges(fx, fy, g)
    ex = hx.reshape(-1, 4)
    ey = hy.reshape(-1, 4)
    pieces = edge_pieces(ex, ey, g)
    for k in range(ex.shape[0]):
        a, b = pieces.offsets[k], pieces.offsets[k + 1]
        assert pieces.ta[a] == -1.0 and pieces.tb[b - 1] == 1.0
        np.testing.assert_array_equal(pieces.tb[a:b - 1], pieces.ta[a + 1:b])
