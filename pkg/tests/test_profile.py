"""Velocity profiling, time parameterization, and full trajectory builds."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tgsim import (
    EmptyPath,
    InteriorZeroVelocity,
    LimitSet,
    PathPoint,
    build_trajectory,
    time_parameterize,
    velocity_profile,
)

from conftest import COURSE_WP, profile_violations, random_limits, random_waypoints

KMH5 = 5.0 / 3.6


def straight_points(length: float, ds: float = 0.25) -> list[PathPoint]:
    s = np.arange(0.0, length + ds / 2, ds)
    return [PathPoint(x=float(si), y=0.0, heading=0.0, kappa=0.0, s=float(si)) for si in s]


class TestVelocityProfile:
    def test_trapezoid_on_long_straight(self):
        limits = LimitSet(v_max=KMH5, a_max=1.0, d_max=1.0, j_max=1.0)
        pts = straight_points(100.0)
        v = velocity_profile(pts, limits)
        assert v[0] == 0.0 and v[-1] == 0.0
        # cruise plateau equals v_max exactly
        assert abs(v.max() - limits.v_max) < 1e-9
        assert np.sum(np.abs(v - limits.v_max) < 1e-9) > 100
        # ramp up, cruise, ramp down
        peak = int(np.argmax(v))
        assert np.all(np.diff(v[: peak + 1]) >= -1e-12)

    def test_short_path_is_triangular(self):
        limits = LimitSet(v_max=3.0, a_max=0.5, d_max=0.5, j_max=1.0)
        pts = straight_points(3.0)
        v = velocity_profile(pts, limits)
        # 2*v_max^2/(2a) = 18 m needed for a full trapezoid
        assert v.max() < limits.v_max

    def test_empty_path(self):
        with pytest.raises(EmptyPath):
            velocity_profile([], LimitSet())

    def test_curvature_cap_pointwise(self):
        limits = LimitSet(v_max=9.0, a_max=2.0, d_max=2.0, a_lat_max=1.5, j_max=2.0)
        traj = build_trajectory([(0, 0), (8, 4), (16, -4), (24, 0)], limits)
        assert np.all(traj.v**2 * np.abs(traj.kappa) <= limits.a_lat_max + 1e-6)
        cap = np.minimum(limits.v_max, np.sqrt(limits.a_lat_max / np.maximum(np.abs(traj.kappa), 1e-6)))
        assert np.all(traj.v <= cap + 1e-9)

    def test_feasibility_oracle_on_fixed_profiles(self):
        for wp, limits in [
            ([(0, 0), (50, 0), (100, 0)],
             LimitSet(v_max=KMH5, a_max=1.0, d_max=1.0, j_max=1.0)),
            ([(0, 0), (8, 3), (16, -3), (24, 3), (32, 0), (40, 0)],
             LimitSet(v_max=8 / 3.6, a_max=0.8, d_max=0.8, a_lat_max=1.0, j_max=0.6, kappa_max=0.5)),
        ]:
            traj = build_trajectory(wp, limits)
            assert profile_violations(traj.s, traj.v, traj.t, limits) == []

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_feasibility_property(self, seed):
        rng = np.random.default_rng(seed)
        wp = random_waypoints(rng)
        limits = random_limits(rng)
        try:
            traj = build_trajectory(wp, limits, traj_id="prop")
        except InteriorZeroVelocity:
            # pathological near-zero curvature caps; builder refuses instead of lying
            return
        assert profile_violations(traj.s, traj.v, traj.t, limits) == []
        assert np.all(traj.v**2 * np.abs(traj.kappa) <= limits.a_lat_max + 1e-6)


class TestTimeParameterize:
    def test_constant_speed(self):
        pts = straight_points(10.0)
        v = np.ones(len(pts))
        t = time_parameterize(pts, v)
        assert t[0] == 0.0
        assert abs(t[-1] - 10.0) < 1e-9

    def test_two_point_segment(self):
        pts = [PathPoint(0, 0, 0, 0, 0.0), PathPoint(2, 0, 0, 0, 2.0)]
        t = time_parameterize(pts, np.array([1.0, 3.0]))
        assert t[0] == 0.0
        assert abs(t[1] - 2 * 2.0 / (1.0 + 3.0)) < 1e-12

    def test_interior_zero_rejected(self):
        pts = straight_points(1.0)
        v = np.ones(len(pts))
        v[2] = 0.0
        with pytest.raises(InteriorZeroVelocity):
            time_parameterize(pts, v)

    def test_adjacent_standstill_rejected(self):
        pts = [PathPoint(0, 0, 0, 0, 0.0), PathPoint(1, 0, 0, 0, 1.0)]
        with pytest.raises(InteriorZeroVelocity):
            time_parameterize(pts, np.array([0.0, 0.0]))

    def test_paper_scale_duration(self):
        limits = LimitSet(v_max=KMH5, a_max=0.5, d_max=0.5, j_max=1.0)
        traj = build_trajectory([(0, 0), (30, 0), (61.5, 0)], limits)
        assert traj.duration == pytest.approx(47.0, abs=2.5)


class TestBuildTrajectory:
    def test_minimal_two_waypoints(self):
        traj = build_trajectory([(0, 0), (10, 0)], LimitSet())
        assert traj.validate() == []
        assert traj.v[0] == 0.0 and traj.v[-1] == 0.0
        assert traj.t[0] == 0.0 and np.all(np.diff(traj.t) > 0)

    def test_seven_waypoint_course(self):
        traj = build_trajectory(COURSE_WP, LimitSet(), traj_id="course")
        assert traj.validate() == []
        assert traj.length > 60.0

    def test_hairpin_still_builds(self):
        # three-point-circle curvature far above the 0.25 1/m vehicle limit
        wp = [(0, 0), (4, 0), (8, 0), (8.6, 1.2), (8, 2.4), (4, 2.4), (0, 2.4)]
        limits = LimitSet()
        traj = build_trajectory(wp, limits, traj_id="hairpin")
        assert traj.validate() == []
        assert np.abs(traj.kappa).max() > limits.kappa_max

    def test_determinism_bit_identical(self):
        wp = [(0, 0), (9, 3), (20, -2), (30, 0)]
        a = build_trajectory(wp, LimitSet(), traj_id="same")
        b = build_trajectory(wp, LimitSet(), traj_id="same")
        for fa, fb in [(a.x, b.x), (a.y, b.y), (a.heading, b.heading),
                       (a.kappa, b.kappa), (a.s, b.s), (a.v, b.v), (a.t, b.t)]:
            assert np.array_equal(fa, fb)
