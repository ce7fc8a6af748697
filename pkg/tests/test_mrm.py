"""Safe-stop plan generation."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tgsim import LimitSet, ProgressOutOfRange, build_trajectory, generate_mrm

KMH5 = 5.0 / 3.6


from conftest import COURSE_WP


@pytest.fixture(scope="module")
def course():
    return build_trajectory(COURSE_WP, LimitSet(), traj_id="course")


def test_zero_speed_gives_single_point(course):
    plan = generate_mrm(course, 5.0, 0.0, course.limits)
    assert plan.n == 1
    assert plan.v[0] == 0.0
    assert plan.generated_at_s == 5.0


def test_stop_distance_closed_form_and_quadrature(course):
    plan = generate_mrm(course, 10.0, KMH5, course.limits, at_time=3.2)
    expected = KMH5**2 / (2 * course.limits.d_mrm)
    assert plan.stop_s - 10.0 == pytest.approx(expected, abs=1e-9)
    assert plan.generated_at_time == 3.2
    # numeric integration cross-check: ds = v dt under constant decel
    t_stop = KMH5 / course.limits.d_mrm
    ts = np.linspace(0, t_stop, 20001)
    dist = np.trapezoid(np.maximum(KMH5 - course.limits.d_mrm * ts, 0.0), ts)
    assert plan.stop_s - 10.0 == pytest.approx(dist, abs=1e-6)


def test_profile_monotone_and_decel_bounded(course):
    plan = generate_mrm(course, 20.0, 1.2, course.limits)
    assert np.all(np.diff(plan.v) <= 1e-12)
    assert plan.v[-1] == 0.0
    dec = (plan.v[:-1] ** 2 - plan.v[1:] ** 2) / (2 * np.diff(plan.s))
    assert np.all(dec <= course.limits.d_mrm + 1e-6)


def test_clamped_at_path_end(course):
    s_near_end = course.length - 0.05
    plan = generate_mrm(course, s_near_end, 1.0, course.limits)
    assert plan.clamped
    assert plan.stop_s == pytest.approx(course.length)
    assert plan.v[-1] == 0.0


def test_progress_out_of_range(course):
    with pytest.raises(ProgressOutOfRange):
        generate_mrm(course, -0.5, 1.0, course.limits)
    with pytest.raises(ProgressOutOfRange):
        generate_mrm(course, course.length + 1.0, 1.0, course.limits)
    with pytest.raises(ProgressOutOfRange):
        generate_mrm(course, 1.0, -0.2, course.limits)


def test_regeneration_progress_is_monotone(course):
    prev = None
    for s_now in np.linspace(0.0, 30.0, 40):
        plan = generate_mrm(course, float(s_now), course.v_at(float(s_now)), course.limits)
        if prev is not None:
            assert plan.generated_at_s >= prev.generated_at_s
        prev = plan


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.0), st.data())
def test_mrm_dominates_reference(course, frac, data):
    # braking at d_mrm >= d_max can never exceed the remaining reference profile
    s_now = frac * course.length
    v_now = course.v_at(s_now)
    plan = generate_mrm(course, s_now, v_now, course.limits)
    ref = np.interp(plan.s, course.s, course.v)
    assert np.all(plan.v <= ref + 1e-9)
