import math

import numpy as np
import pytest

import ellipticmc as emc
from ellipticmc.errors import ConfigurationError, InputError
from oracles import brute_force_interior_lattice


class TestSignedDistance:
    def test_unit_ball_center(self, unit_ball):
        assert unit_ball.signed_distance(np.zeros(3)) == -1.0

    def test_unit_ball_exterior(self, unit_ball):
        assert unit_ball.signed_distance(np.array([2.0, 0, 0])) == 1.0

    def test_box_interior(self, unit_box):
        assert unit_box.signed_distance(np.array([0.0, 0, 0.5])) == -0.5

    def test_dimension_mismatch(self, unit_ball):
        with pytest.raises(InputError):
            unit_ball.signed_distance(np.zeros(4))

    def test_d_below_3_rejected(self):
        with pytest.raises(ConfigurationError):
            emc.ball(2)

    def test_annulus(self):
        ann = emc.annulus(3, r_in=0.5, r_out=1.0)
        assert ann.signed_distance(np.array([0.75, 0, 0])) == -0.25
        assert ann.signed_distance(np.array([0.25, 0, 0])) == 0.25
        assert ann.signed_distance(np.array([1.5, 0, 0])) == 0.5

    def test_implicit_sphere(self):
        dom = emc.implicit(3, "r - 1", enclosing_radius=1.0)
        assert dom.signed_distance(np.zeros(3)) == -1.0
        assert dom.signed_distance(np.array([0.0, 2.0, 0.0])) == 1.0


class TestMembershipAgreement:
    # sign of sd agrees with a shape-specific membership test on 1e4 points
    N = 10_000

    def _points(self, lo, hi):
        gen = np.random.default_rng(99)
        return lo + gen.random((self.N, 3)) * (np.asarray(hi) - np.asarray(lo))

    def test_ball(self, unit_ball):
        pts = self._points([-1.2] * 3, [1.2] * 3)
        inside = np.linalg.norm(pts, axis=1) < 1.0
        sd = unit_ball.signed_distance(pts)
        assert np.array_equal(sd < 0, inside)

    def test_box(self, unit_box):
        pts = self._points([-1.5] * 3, [1.5] * 3)
        inside = np.all(np.abs(pts) < 1.0, axis=1)
        sd = unit_box.signed_distance(pts)
        assert np.array_equal(sd < 0, inside)

    def test_annulus(self):
        ann = emc.annulus(3, r_in=0.4, r_out=1.1)
        pts = self._points([-1.3] * 3, [1.3] * 3)
        rho = np.linalg.norm(pts, axis=1)
        inside = (rho > 0.4) & (rho < 1.1)
        assert np.array_equal(ann.signed_distance(pts) < 0, inside)


class TestProjection:
    def test_radial(self, unit_ball):
        y = unit_ball.project_to_boundary(np.array([0.5, 0, 0]))
        assert np.allclose(y, [1, 0, 0], atol=1e-15)
        y = unit_ball.project_to_boundary(np.array([0.0, 0, -0.999]))
        assert np.allclose(y, [0, 0, -1], atol=1e-12)

    def test_box_face(self, unit_box):
        y = unit_box.project_to_boundary(np.array([0.9, 0, 0]))
        assert np.allclose(y, [1, 0, 0], atol=1e-15)

    def test_ball_center_rejected(self, unit_ball):
        with pytest.raises(InputError):
            unit_ball.project_to_boundary(np.zeros(3))

    @pytest.mark.parametrize("make", [
        lambda: emc.ball(3),
        lambda: emc.ball(3, center=[0.3, -0.2, 0.1], radius=0.8),
        lambda: emc.box(3, [-1, -0.5, -2], [1, 1.5, 0.5]),
        lambda: emc.annulus(3, r_in=0.4, r_out=1.1),
        lambda: emc.implicit(3, "r - 1", enclosing_radius=1.0),
    ])
    def test_projection_lands_on_boundary(self, make):
        # 1e3 random near-boundary points per shape
        dom = make()
        gen = np.random.default_rng(7)
        lo, hi = dom.bounding_box()
        pts = lo + gen.random((20_000, 3)) * (hi - lo)
        sd = np.asarray(dom.signed_distance(pts))
        near = pts[np.abs(sd) < 0.1 * dom.enclosing_radius][:1000]
        assert len(near) >= 500
        proj = dom.project_to_boundary(near)
        tol = (
            dom.boundary_tolerance
            if isinstance(dom.shape, emc.geometry.Implicit)
            else 1e-12 * dom.enclosing_radius
        )
        assert np.all(np.abs(np.asarray(dom.signed_distance(proj))) <= tol)


class TestEnclosingBall:
    def test_unit_ball(self, unit_ball):
        assert emc.enclosing_ball(unit_ball) == 1.0

    def test_box_corner_norm(self, unit_box):
        assert emc.enclosing_ball(unit_box) == pytest.approx(math.sqrt(3), abs=1e-12)

    def test_shifted_ball(self):
        dom = emc.ball(3, center=[0.5, 0, 0], radius=1.0)
        assert emc.enclosing_ball(dom) == 1.5

    def test_implicit_requires_radius(self):
        with pytest.raises(ConfigurationError):
            emc.implicit(3, "r - 1")


class TestInteriorGrid:
    def test_unit_ball_19_points(self, unit_ball):
        grid = unit_ball.interior_grid(0.5)
        assert len(grid) == 19
        assert any(np.all(p == 0.0) for p in grid)
        # brute-force enumeration of the same contract
        brute = brute_force_interior_lattice(
            lambda p: np.linalg.norm(p) - 1.0, [-1] * 3, [1] * 3, 0.5, 3
        )
        assert len(brute) == 19
        assert np.allclose(np.sort(grid, axis=0), np.sort(brute, axis=0))

    def test_spacing_too_large(self, unit_ball):
        with pytest.raises(ConfigurationError):
            unit_ball.interior_grid(2.5)

    def test_box_brute_force(self, unit_box):
        # center-anchored lattice: {0, +-1}^3 minus margin exclusions
        grid = unit_box.interior_grid(1.0)
        brute = brute_force_interior_lattice(
            lambda p: np.max(np.abs(p)) - 1.0, [-1] * 3, [1] * 3, 1.0, 3
        )
        assert np.allclose(np.sort(grid, axis=0), np.sort(brute, axis=0))

    def test_points_distinct_and_interior(self, unit_ball):
        grid = unit_ball.interior_grid(0.3)
        assert len(np.unique(grid, axis=0)) == len(grid)
        assert np.all(unit_ball.signed_distance(grid) <= -0.15 + 1e-12)

    def test_deterministic_ordering(self, unit_ball):
        g1 = unit_ball.interior_grid(0.4)
        g2 = unit_ball.interior_grid(0.4)
        assert np.array_equal(g1, g2)
