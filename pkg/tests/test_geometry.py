import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maeig.geometry import (
    ConvexPolygon,
    Disk,
    Ellipse,
    GridError,
    Rectangle,
    apply_unimodular,
    area,
    boundary_distance,
    boundary_fraction,
    build_grid,
    contains,
    diameter,
    inscribed_polygon,
)
from maeig.operators import default_stencil

UNIT_DISK = Disk((0.0, 0.0), 1.0)
UNIT_SQUARE = Rectangle((0.0, 0.0), (1.0, 1.0))
TRIANGLE = ConvexPolygon(((0.0, 0.0), (1.0, 0.0), (0.0, 1.0)))


class TestContains:
    def test_disk_center(self):
        assert contains(UNIT_DISK, (0.0, 0.0))

    def test_disk_boundary_excluded(self):
        assert not contains(UNIT_DISK, (1.0, 0.0))

    def test_square_interior(self):
        assert contains(UNIT_SQUARE, (0.5, 0.999))

    def test_polygon_boundary_excluded(self):
        assert not contains(TRIANGLE, (0.5, 0.0))

    def test_ellipse(self):
        e = Ellipse((0.0, 0.0), 2.0, 1.0)
        assert contains(e, (1.9, 0.0))
        assert not contains(e, (0.0, 1.0))


class TestArea:
    def test_disk(self):
        assert area(UNIT_DISK) == pytest.approx(math.pi, rel=1e-15)

    def test_unit_square(self):
        assert area(UNIT_SQUARE) == 1.0

    def test_triangle_shoelace(self):
        assert area(TRIANGLE) == pytest.approx(0.5, rel=1e-15)

    def test_ellipse(self):
        assert area(Ellipse((0.0, 0.0), 2.0, 1.0)) == pytest.approx(2 * math.pi)

    def test_diameter(self):
        assert diameter(UNIT_DISK) == 2.0
        assert diameter(UNIT_SQUARE) == pytest.approx(math.sqrt(2.0))


class TestBoundaryFraction:
    def test_interior_neighbor(self):
        assert boundary_fraction(UNIT_DISK, (0.5, 0.0), (1, 0), 0.25) == 1.0

    def test_disk_cut_ray(self):
        # boundary at distance 0.125, step 0.25
        assert boundary_fraction(UNIT_DISK, (0.875, 0.0), (1, 0), 0.25) == pytest.approx(0.5)

    def test_square_cut_ray(self):
        assert boundary_fraction(UNIT_SQUARE, (0.9, 0.5), (1, 0), 0.2) == pytest.approx(0.5)

    def test_requires_interior_point(self):
        with pytest.raises(ValueError, match="not interior"):
            boundary_fraction(UNIT_DISK, (1.5, 0.0), (1, 0), 0.25)

    @settings(max_examples=60, deadline=None, derandomize=True)
    @given(
        r=st.floats(0.0, 0.95),
        ang=st.floats(0.0, 2 * math.pi),
        d=st.sampled_from([(1, 0), (0, 1), (1, 1), (-1, 1), (2, 1), (-1, -2)]),
    )
    def test_hit_point_on_disk_boundary(self, r, ang, d):
        p = (r * math.cos(ang), r * math.sin(ang))
        h = 5.0  # force the ray to exit within one step
        theta = boundary_fraction(UNIT_DISK, p, d, h)
        norm = math.hypot(*d)
        hit = (p[0] + theta * h * d[0], p[1] + theta * h * d[1])
        assert abs(hit[0] ** 2 + hit[1] ** 2 - 1.0) < 1e-10

    @settings(max_examples=60, deadline=None, derandomize=True)
    @given(
        x=st.floats(0.05, 0.95),
        y=st.floats(0.05, 0.95),
        d=st.sampled_from([(1, 0), (0, 1), (1, 1), (-1, 2)]),
    )
    def test_hit_point_on_square_boundary(self, x, y, d):
        h = 5.0
        theta = boundary_fraction(UNIT_SQUARE, (x, y), d, h)
        hx, hy = x + theta * h * d[0], y + theta * h * d[1]
        on_edge = min(abs(hx), abs(hx - 1), abs(hy), abs(hy - 1)) < 1e-10
        inside = 0 - 1e-10 <= hx <= 1 + 1e-10 and 0 - 1e-10 <= hy <= 1 + 1e-10
        assert on_edge and inside

    @settings(max_examples=60, deadline=None, derandomize=True)
    @given(
        r=st.floats(0.0, 0.9),
        ang=st.floats(0.0, 2 * math.pi),
        rot=st.floats(0.0, 1.5),
        d=st.sampled_from([(1, 0), (0, 1), (1, 1), (2, -1)]),
    )
    def test_hit_point_on_ellipse_boundary(self, r, ang, rot, d):
        e = Ellipse((0.3, -0.2), 1.7, 0.9, rot)
        c, s = math.cos(rot), math.sin(rot)
        # park the start point inside via the ellipse parametrization
        ex, ey = 1.7 * r * math.cos(ang), 0.9 * r * math.sin(ang)
        p = (0.3 + c * ex - s * ey, -0.2 + s * ex + c * ey)
        theta = boundary_fraction(e, p, d, 10.0)
        hx, hy = p[0] + theta * 10.0 * d[0], p[1] + theta * 10.0 * d[1]
        qx = (c * (hx - 0.3) + s * (hy + 0.2)) / 1.7
        qy = (-s * (hx - 0.3) + c * (hy + 0.2)) / 0.9
        assert abs(qx * qx + qy * qy - 1.0) < 1e-10


class TestUnimodular:
    def test_identity(self):
        out = apply_unimodular(UNIT_SQUARE, np.eye(2))
        assert area(out) == pytest.approx(1.0, rel=1e-12)

    def test_rotation(self):
        a = math.pi / 4
        T = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
        out = apply_unimodular(UNIT_SQUARE, T)
        assert area(out) == pytest.approx(1.0, rel=1e-10)

    def test_shear(self):
        out = apply_unimodular(UNIT_SQUARE, np.array([[1.0, 1.0], [0.0, 1.0]]))
        assert area(out) == pytest.approx(1.0, rel=1e-10)

    def test_rejects_non_unimodular(self):
        with pytest.raises(ValueError, match="unimodular"):
            apply_unimodular(UNIT_SQUARE, 2.0 * np.eye(2))

    def test_analytic_domain_inscribed(self):
        out = apply_unimodular(UNIT_DISK, np.eye(2), n_vertices=512)
        assert area(out) == pytest.approx(math.pi, rel=1e-3)
        assert area(out) < math.pi  # inscribed

    def test_area_preserved_for_polygons(self):
        T = np.array([[2.0, 0.3], [1.0, 0.65]])
        T[1, 1] = (1.0 + T[0, 1] * T[1, 0]) / T[0, 0]
        poly = inscribed_polygon(Ellipse((0.5, -0.25), 1.5, 0.8, 0.3), 128)
        assert area(apply_unimodular(poly, T)) == pytest.approx(area(poly), rel=1e-10)


class TestBuildGrid:
    def test_disk_h_half_counts(self):
        # oracle: brute-force enumeration of the 5x5 candidate lattice
        xs = np.linspace(-1, 1, 5)
        brute = sum(1 for x in xs for y in xs if x * x + y * y < 1.0)
        g = build_grid(UNIT_DISK, 0.5)
        assert g.shape == (5, 5)
        assert g.num_interior == brute == 9

    def test_unit_square_interior_count(self):
        g = build_grid(UNIT_SQUARE, 0.25)
        assert g.num_interior == 9  # 3 x 3

    def test_too_coarse(self):
        with pytest.raises(GridError, match="too coarse"):
            build_grid(UNIT_DISK, 3.0)

    def test_interior_nodes_strictly_inside(self, disk_grid_16):
        g = disk_grid_16
        assert np.all(np.hypot(g.nodes_xy[:, 0], g.nodes_xy[:, 1]) < 1.0)

    def test_theta_in_range(self, disk_grid_16):
        g = disk_grid_16
        assert np.all(g.theta > 0.0) and np.all(g.theta <= 1.0)

    def test_exit_points_on_boundary(self, disk_grid_16):
        g = disk_grid_16
        dirs = g.stencil.signed_directions().astype(float)
        for d in range(dirs.shape[0]):
            miss = g.nbr[:, d] < 0
            if not np.any(miss):
                continue
            step = g.theta[miss, d, None] * g.h * dirs[d]
            hit = g.nodes_xy[miss] + step
            assert np.max(np.abs(hit[:, 0] ** 2 + hit[:, 1] ** 2 - 1.0)) < 1e-10

    def test_interior_neighbors_have_theta_one(self, disk_grid_16):
        g = disk_grid_16
        assert np.all(g.theta[g.nbr >= 0] == 1.0)

    def test_monotone_refinement(self):
        coarse = build_grid(UNIT_DISK, 1.0 / 8.0)
        fine = build_grid(UNIT_DISK, 1.0 / 16.0)
        fine_set = {(round(x, 12), round(y, 12)) for x, y in fine.nodes_xy}
        for x, y in coarse.nodes_xy:
            assert (round(x, 12), round(y, 12)) in fine_set

    def test_deterministic(self):
        g1 = build_grid(UNIT_DISK, 0.21)
        g2 = build_grid(UNIT_DISK, 0.21)
        assert np.array_equal(g1.nodes_xy, g2.nodes_xy)
        assert np.array_equal(g1.theta, g2.theta)

    def test_wide_stencil_grid(self):
        g = build_grid(UNIT_DISK, 0.25, default_stencil(4))
        assert g.nbr.shape[1] == 16
        assert np.all(g.theta > 0.0)


class TestBoundaryDistance:
    def test_disk(self):
        d = boundary_distance(UNIT_DISK, np.array([[0.0, 0.0], [0.5, 0.0]]))
        assert d == pytest.approx([1.0, 0.5])

    def test_square(self):
        d = boundary_distance(UNIT_SQUARE, np.array([[0.5, 0.5], [0.1, 0.4]]))
        assert d == pytest.approx([0.5, 0.1])

    def test_ellipse_axes_points(self):
        e = Ellipse((0.0, 0.0), 2.0, 1.0)
        d = boundary_distance(e, np.array([[1.5, 0.0], [0.0, 0.5], [0.0, 0.0]]))
        assert d[0] == pytest.approx(0.5, abs=1e-9)
        assert d[1] == pytest.approx(0.5, abs=1e-9)
        assert d[2] == pytest.approx(1.0, abs=1e-9)  # closest point is on the minor axis

    def test_rotated_ellipse_matches_unrotated(self):
        rot = 0.7
        e0 = Ellipse((0.0, 0.0), 2.0, 1.0)
        e1 = Ellipse((0.0, 0.0), 2.0, 1.0, rot)
        pts = np.array([[0.8, 0.1], [-0.3, 0.55], [1.2, -0.2]])
        c, s = math.cos(rot), math.sin(rot)
        R = np.array([[c, -s], [s, c]])
        assert boundary_distance(e1, pts @ R.T) == pytest.approx(
            boundary_distance(e0, pts), abs=1e-9
        )


class TestValidation:
    def test_polygon_must_be_ccw_convex(self):
        with pytest.raises(ValueError, match="convex"):
            ConvexPolygon(((0.0, 0.0), (0.0, 1.0), (1.0, 0.0)))  # clockwise

    def test_positive_radius(self):
        with pytest.raises(ValueError):
            Disk((0.0, 0.0), -1.0)

    def test_rectangle_corner_order(self):
        with pytest.raises(ValueError):
            Rectangle((1.0, 0.0), (0.0, 1.0))
