"""Trajectory-guidance teleoperation simulator."""

from .spline import SplineModel, TooFewWaypoints, NonFiniteInput, fit_spline, merge_waypoints
from .trajectory import (
    DegenerateSpline,
    EmptyPath,
    InteriorZeroVelocity,
    LimitSet,
    MrmPlan,
    PathPoint,
    ProgressOutOfRange,
    Trajectory,
    Waypoint,
    build_trajectory,
    generate_mrm,
    resample_equidistant,
    time_parameterize,
    velocity_profile,
)

__version__ = "0.1.0"
