"""Spline fitting and equidistant resampling."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tgsim import (
    DegenerateSpline,
    NonFiniteInput,
    TooFewWaypoints,
    fit_spline,
    merge_waypoints,
    resample_equidistant,
)

from conftest import COURSE_WP, random_waypoints


def fd_second(spl, u0: float, d: float):
    xs, ys = zip(*(spl.eval(u0 + k * d) for k in (-1, 0, 1)))
    return (xs[0] - 2 * xs[1] + xs[2]) / d**2, (ys[0] - 2 * ys[1] + ys[2]) / d**2


def second_derivative_jump(spl, uk: float, d: float = 1e-4, extrapolate: bool = False) -> float:
    """Finite-difference d2/du2 discontinuity estimate at a knot.

    With ``extrapolate`` the one-sided estimates at uk -/+ d and uk -/+ 2d
    are linearly extrapolated to the knot itself, which cancels the smooth
    third-derivative variation and isolates the jump.
    """
    if not extrapolate:
        (lx, ly) = fd_second(spl, uk - d, d)
        (rx, ry) = fd_second(spl, uk + d, d)
        return max(abs(lx - rx), abs(ly - ry))
    lx1, ly1 = fd_second(spl, uk - d, d)
    lx2, ly2 = fd_second(spl, uk - 2 * d, d)
    rx1, ry1 = fd_second(spl, uk + d, d)
    rx2, ry2 = fd_second(spl, uk + 2 * d, d)
    lx, ly = 2 * lx1 - lx2, 2 * ly1 - ly2
    rx, ry = 2 * rx1 - rx2, 2 * ry1 - ry2
    return max(abs(lx - rx), abs(ly - ry))


class TestFitSpline:
    def test_two_points_is_a_line(self):
        spl = fit_spline([(0, 0), (10, 0)])
        u = np.linspace(0, spl.u_end, 50)
        xs, ys = spl.eval(u)
        assert np.allclose(xs, u * 10 / spl.u_end, atol=1e-12)
        assert np.allclose(ys, 0.0, atol=1e-12)

    def test_collinear_input_has_zero_curvature(self):
        spl = fit_spline([(0, 0), (5, 0), (10, 0)])
        kappa = spl.curvature(np.linspace(0, spl.u_end, 200))
        assert np.all(np.abs(kappa) < 1e-9)

    def test_interior_knot_second_derivative_continuous(self):
        spl = fit_spline([(0, 0), (5, 5), (10, 0)])
        assert second_derivative_jump(spl, float(spl.u[1])) < 1e-8

    def test_too_few_waypoints(self):
        with pytest.raises(TooFewWaypoints):
            fit_spline([(0, 0)])
        # near-duplicates merge down to a single point
        with pytest.raises(TooFewWaypoints):
            fit_spline([(0, 0), (0.2, 0.1), (0.3, 0.0)])

    def test_non_finite_rejected(self):
        with pytest.raises(NonFiniteInput):
            fit_spline([(0, 0), (np.nan, 1)])
        with pytest.raises(NonFiniteInput):
            fit_spline([(0, 0), (np.inf, 1)])

    def test_merge_keeps_spacing(self):
        pts = merge_waypoints([(0, 0), (0.1, 0), (1, 0), (1.2, 0), (5, 0)])
        gaps = np.hypot(*np.diff(pts, axis=0).T)
        assert np.all(gaps >= 0.5)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_interpolation_and_c2_property(self, seed):
        wp = random_waypoints(np.random.default_rng(seed))
        spl = fit_spline(wp)
        # reproduces waypoints at knots
        xs, ys = spl.eval(spl.u)
        err = np.hypot(xs - spl.x, ys - spl.y).max()
        assert err < 1e-9
        # C2: second-derivative jump at interior knots, relative to scale
        scale = max(np.abs(spl.mx).max(), np.abs(spl.my).max(), 1.0)
        for uk in spl.u[1:-1]:
            # extrapolated one-sided estimates isolate the jump from smooth
            # third-derivative variation across the knot
            jump = second_derivative_jump(spl, float(uk), d=1e-3, extrapolate=True)
            assert jump / scale < 1e-6

    def test_natural_boundary_conditions(self):
        spl = fit_spline([(0, 0), (3, 4), (8, 2), (12, 6)])
        ddx, ddy = spl.deriv(np.array([0.0, spl.u_end]), order=2)
        assert np.all(np.abs(ddx) < 1e-12)
        assert np.all(np.abs(ddy) < 1e-12)


class TestResample:
    def test_straight_line_41_points(self):
        spl = fit_spline([(0, 0), (10, 0)])
        pts = resample_equidistant(spl, 0.25)
        assert len(pts) == 41
        assert all(abs(p.kappa) < 1e-9 for p in pts)
        assert all(abs(p.heading) < 1e-9 for p in pts)

    def test_arc_spacing_within_one_percent(self, rng):
        for _ in range(10):
            spl = fit_spline(random_waypoints(rng))
            pts = resample_equidistant(spl, 0.25)
            s = np.array([p.s for p in pts])
            gaps = np.diff(s)
            assert np.all(np.abs(gaps[:-1] - 0.25) < 0.0025)
            assert gaps[-1] <= 0.25 + 0.0025
            # s must track true (chordal) arc length closely
            chords = np.hypot(np.diff([p.x for p in pts]), np.diff([p.y for p in pts]))
            assert np.all(chords <= 0.25 * 1.01)

    def test_curvature_against_circumscribed_circle_oracle(self):
        # gentle bend so chord-based circle fit is a faithful oracle
        spl = fit_spline([(0, 0), (10, 2.5), (20, 0)])
        pts = resample_equidistant(spl, 0.25)
        xs = np.array([p.x for p in pts])
        ys = np.array([p.y for p in pts])
        kap = np.array([p.kappa for p in pts])

        def circle_kappa(i):
            (x1, y1), (x2, y2), (x3, y3) = (xs[i - 1], ys[i - 1]), (xs[i], ys[i]), (xs[i + 1], ys[i + 1])
            area2 = (x2 - x1) * (y3 - y1) - (y2 - y1) * (x3 - x1)
            d12 = np.hypot(x2 - x1, y2 - y1)
            d23 = np.hypot(x3 - x2, y3 - y2)
            d13 = np.hypot(x3 - x1, y3 - y1)
            return 2 * abs(area2) / (d12 * d23 * d13)

        i_peak = int(np.argmax(np.abs(kap)))
        oracle = circle_kappa(i_peak)
        assert abs(abs(kap[i_peak]) - oracle) <= 0.05 * oracle

    def test_scenario_scale_point_count(self):
        # ~60 m start-goal with 7 waypoints resamples to a few hundred points
        spl = fit_spline(COURSE_WP)
        pts = resample_equidistant(spl, 0.25)
        assert 250 <= len(pts) <= 270

    def test_degenerate_spline(self):
        spl = fit_spline([(0, 0), (0.6, 0)])
        with pytest.raises(DegenerateSpline):
            resample_equidistant(spl, 5.0)

    def test_bad_spacing_rejected(self):
        spl = fit_spline([(0, 0), (10, 0)])
        with pytest.raises(ValueError):
            resample_equidistant(spl, 0.0)
