"""Reference-trajectory construction and safe-stop plan generation.

Pipeline: waypoints -> C2 spline -> equidistant path points with curvature
-> curvature-aware trapezoidal velocity profile with jerk rounding
-> trapezoidal time parameterization. All functions are pure and
deterministic; identical inputs produce bit-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spline import SplineModel, fit_spline

DEFAULT_DS_M = 0.25
OPERATOR_V_MAX = 10.0  # 36 km/h hard upper limit for any operator trajectory
_KAPPA_FLOOR = 1e-6
_JERK_MARGIN = 0.90  # build below j_max so the finite-difference check has headroom


class DegenerateSpline(ValueError):
    """Spline total length is below the resample spacing."""


class EmptyPath(ValueError):
    """Velocity profile requested for an empty point list."""


class InteriorZeroVelocity(ValueError):
    """A non-terminal point has zero speed; segment cannot be timed."""


class ProgressOutOfRange(ValueError):
    """Stop-plan progress lies outside the trajectory arc range."""


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float


@dataclass(frozen=True)
class PathPoint:
    x: float
    y: float
    heading: float
    kappa: float
    s: float


@dataclass(frozen=True)
class LimitSet:
    """Motion limits used to build and check trajectories.

    d_max and d_mrm are positive deceleration magnitudes; d_mrm is the
    emergency-stop deceleration and must not be below d_max.
    """

    v_max: float = 5.0 / 3.6
    a_max: float = 0.5
    d_max: float = 0.5
    a_lat_max: float = 1.5
    j_max: float = 1.0
    kappa_max: float = 0.25
    d_mrm: float = 2.0

    def __post_init__(self):
        for name in ("v_max", "a_max", "d_max", "a_lat_max", "j_max", "kappa_max", "d_mrm"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.v_max > OPERATOR_V_MAX + 1e-9:
            raise ValueError(f"v_max {self.v_max} exceeds operator limit {OPERATOR_V_MAX} m/s")
        if self.d_mrm < self.d_max - 1e-12:
            raise ValueError("d_mrm must be >= d_max")

    def to_payload(self) -> dict:
        return {
            "v_max": self.v_max,
            "a_max": self.a_max,
            "d_max": self.d_max,
            "a_lat_max": self.a_lat_max,
            "j_max": self.j_max,
            "kappa_max": self.kappa_max,
            "d_mrm": self.d_mrm,
        }

    @classmethod
    def from_payload(cls, d: dict) -> "LimitSet":
        return cls(**{k: float(d[k]) for k in (
            "v_max", "a_max", "d_max", "a_lat_max", "j_max", "kappa_max", "d_mrm")})


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


@dataclass(frozen=True)
class Trajectory:
    """Reference trajectory: equidistant path points, speeds, timestamps."""

    x: np.ndarray
    y: np.ndarray
    heading: np.ndarray
    kappa: np.ndarray
    s: np.ndarray
    v: np.ndarray
    t: np.ndarray
    id: str
    limits: LimitSet

    def __post_init__(self):
        _freeze(self.x, self.y, self.heading, self.kappa, self.s, self.v, self.t)

    @property
    def n(self) -> int:
        return len(self.s)

    @property
    def length(self) -> float:
        return float(self.s[-1])

    @property
    def duration(self) -> float:
        return float(self.t[-1])

    @property
    def points(self) -> list[PathPoint]:
        return [
            PathPoint(float(self.x[i]), float(self.y[i]), float(self.heading[i]),
                      float(self.kappa[i]), float(self.s[i]))
            for i in range(self.n)
        ]

    def point(self, i: int) -> PathPoint:
        return PathPoint(float(self.x[i]), float(self.y[i]), float(self.heading[i]),
                         float(self.kappa[i]), float(self.s[i]))

    def v_at(self, s: float) -> float:
        return float(np.interp(s, self.s, self.v))

    def accel_at(self, s: float) -> float:
        """Piecewise-constant feedforward acceleration dv/dt at arc position s."""
        if self.n < 2:
            return 0.0
        i = int(np.clip(np.searchsorted(self.s, s, side="right") - 1, 0, self.n - 2))
        ds = self.s[i + 1] - self.s[i]
        return float((self.v[i + 1] ** 2 - self.v[i] ** 2) / (2.0 * ds))

    def position_at(self, s: float) -> tuple[float, float]:
        return float(np.interp(s, self.s, self.x)), float(np.interp(s, self.s, self.y))

    def validate(self) -> list[str]:
        """Invariant check; returns human-readable problems (empty if sound)."""
        problems: list[str] = []
        n = self.n
        if not (len(self.x) == len(self.y) == len(self.heading) == len(self.kappa)
                == len(self.s) == len(self.v) == len(self.t)):
            return ["arrays are not aligned"]
        if n < 2:
            problems.append("fewer than 2 points")
            return problems
        for name, arr in (("x", self.x), ("y", self.y), ("heading", self.heading),
                          ("kappa", self.kappa), ("s", self.s), ("v", self.v), ("t", self.t)):
            if not np.isfinite(arr).all():
                problems.append(f"non-finite values in {name}")
        if problems:
            return problems
        if abs(self.v[0]) > 1e-9 or abs(self.v[-1]) > 1e-9:
            problems.append("trajectory must start and end at standstill")
        if np.any(np.diff(self.s) <= 0):
            problems.append("s is not strictly increasing")
        if self.t[0] != 0.0 or np.any(np.diff(self.t) <= 0):
            problems.append("t must start at 0 and increase strictly")
        if np.any(self.v < -1e-12):
            problems.append("negative speed")
        cap = np.minimum(self.limits.v_max,
                         np.sqrt(self.limits.a_lat_max / np.maximum(np.abs(self.kappa), _KAPPA_FLOOR)))
        if np.any(self.v > cap + 1e-9):
            problems.append("speed exceeds velocity/curvature cap")
        return problems


@dataclass(frozen=True)
class MrmPlan:
    """Safe-stop plan: suffix of the reference path with a braking profile."""

    x: np.ndarray
    y: np.ndarray
    heading: np.ndarray
    kappa: np.ndarray
    s: np.ndarray
    v: np.ndarray
    generated_at_s: float
    generated_at_time: float
    clamped: bool = False

    def __post_init__(self):
        _freeze(self.x, self.y, self.heading, self.kappa, self.s, self.v)

    @property
    def n(self) -> int:
        return len(self.s)

    @property
    def stop_s(self) -> float:
        return float(self.s[-1])

    @property
    def points(self) -> list[PathPoint]:
        return [
            PathPoint(float(self.x[i]), float(self.y[i]), float(self.heading[i]),
                      float(self.kappa[i]), float(self.s[i]))
            for i in range(self.n)
        ]

    def v_at(self, s: float) -> float:
        return float(np.interp(s, self.s, self.v))


def _resample_arrays(spline: SplineModel, ds: float) -> tuple[np.ndarray, ...]:
    if ds <= 0:
        raise ValueError("ds must be positive")
    u_dense, s_dense = spline.arc_length_table()
    total = float(s_dense[-1])
    if total < ds:
        raise DegenerateSpline(f"path length {total:.3f} m is below spacing {ds} m")
    count = int(math.floor((total + 1e-12) / ds))
    residual = total - count * ds
    if residual <= 0.01 * ds * count:
        # absorb a sliver of a final gap by shrinking all gaps within the
        # 1% spacing tolerance; avoids numerically degenerate end intervals
        s_targets = np.linspace(0.0, total, count + 1)
    else:
        s_targets = np.concatenate([ds * np.arange(count + 1), [total]])
    uq = np.interp(s_targets, s_dense, u_dense)
    xs, ys = spline.eval(uq)
    heading = spline.heading(uq)
    kappa = spline.curvature(uq)
    return xs, ys, heading, kappa, s_targets


def resample_equidistant(spline: SplineModel, ds: float = DEFAULT_DS_M) -> list[PathPoint]:
    """Sample the spline at equal arc-length spacing ds.

    The final gap may be shorter. Heading and curvature come from the
    analytic spline derivatives. Raises ``DegenerateSpline`` when the
    total length is below ds.
    """
    xs, ys, heading, kappa, s = _resample_arrays(spline, ds)
    return [PathPoint(float(xs[i]), float(ys[i]), float(heading[i]), float(kappa[i]), float(s[i]))
            for i in range(len(s))]


def _forward_envelope(V: np.ndarray, s: np.ndarray, gain: float) -> np.ndarray:
    # accel-limited reachability: V_i <= min_{j<=i} (V_j + gain*(s_i - s_j))
    key = V - gain * s
    return gain * s + np.minimum.accumulate(key)


def _backward_envelope(V: np.ndarray, s: np.ndarray, gain: float) -> np.ndarray:
    key = V + gain * s
    rev = np.minimum.accumulate(key[::-1])[::-1]
    return rev - gain * s


def _funnel_side(delta: np.ndarray, vm: np.ndarray, lim: float, j: float) -> np.ndarray:
    """Speed recoverable at distance delta from a standstill-acceleration anchor.

    Models the fastest jerk-limited rise from state (v=vm, a=0): a jerk
    phase a(t) = j*t up to the acceleration cap, then constant accel.
    """
    t1 = lim / j
    d1 = vm * t1 + j * t1**3 / 6.0
    v1 = vm + lim**2 / (2.0 * j)
    # jerk phase: delta = vm*t + j*t^3/6, a depressed cubic in t
    p = 6.0 * vm / j
    q = 6.0 * np.minimum(delta, d1) / j
    disc = np.sqrt(q**2 / 4.0 + p**3 / 27.0)
    t = np.cbrt(q / 2.0 + disc) + np.cbrt(q / 2.0 - disc)
    v_jerk = vm + j * t**2 / 2.0
    v_lin = np.sqrt(v1**2 + 2.0 * lim * np.maximum(delta - d1, 0.0))
    return np.where(delta <= d1, v_jerk, v_lin)


def _funnel_min(s: np.ndarray, v0: np.ndarray, a_max: float, d_max: float, j: float) -> np.ndarray:
    """Pointwise min over recovery funnels anchored at every profile sample.

    A funnel anchored at (s_m, v_m) bounds how fast the speed may rise away
    from that point: braking release approaching it (d_max side) and
    acceleration build-up leaving it (a_max side). Taking the minimum over
    all anchors removes every convex (valley) jerk corner in one pass; the
    crossings between funnel pieces are all concave.
    """
    delta = s[None, :] - s[:, None]  # [anchor, point]
    vm = v0[:, None]
    right = _funnel_side(np.abs(delta), vm, a_max, j)
    left = _funnel_side(np.abs(delta), vm, d_max, j)
    return np.where(delta >= 0.0, right, left).min(axis=0)


def _velocity_profile_arrays(
    s: np.ndarray,
    kappa: np.ndarray,
    limits: LimitSet,
    v_start: float,
    v_end: float,
    max_iter: int = 2000,
) -> np.ndarray:
    n = len(s)
    if n == 0:
        raise EmptyPath("velocity profile needs at least one point")
    cap = np.minimum(limits.v_max, np.sqrt(limits.a_lat_max / np.maximum(np.abs(kappa), _KAPPA_FLOOR)))
    if n == 1:
        return np.array([min(v_start, cap[0])])

    h = np.diff(s)
    if np.any(h <= 0):
        raise ValueError("s must be strictly increasing")

    Vcap = cap**2
    V = Vcap.copy()
    V[0] = min(v_start**2, Vcap[0])
    V[-1] = min(v_end**2, Vcap[-1])
    ga, gd = 2.0 * limits.a_max, 2.0 * limits.d_max
    V = _backward_envelope(_forward_envelope(V, s, ga), s, gd)

    if n < 3:
        return np.sqrt(np.maximum(V, 0.0))

    j_eff = _JERK_MARGIN * limits.j_max
    v_fun = _funnel_min(s, np.sqrt(np.maximum(V, 0.0)), limits.a_max, limits.d_max, j_eff)
    V = np.minimum(V, v_fun**2)
    V[0] = min(v_start**2, Vcap[0])
    V[-1] = min(v_end**2, Vcap[-1])

    # Concave corner rounding on the V = v^2 scale, where the interval
    # acceleration is the slope A_i = (V[i+1]-V[i])/(2h_i). Every update is
    # a pointwise min, so the sweep is monotone and converges; the bound
    # never drops a point below its lower neighbor, so valleys are
    # preserved. Red-black ordering avoids the slow Jacobi checkerboard.
    w0 = 1.0 / (2.0 * h[:-1])
    w1 = 1.0 / (2.0 * h[1:])

    def _jerk_bounds(V):
        v = np.sqrt(np.maximum(V, 0.0))
        # exact midpoint spacing of the trapezoidal time grid, (t[i+1]-t[i-1])/2
        dt_mid = h[:-1] / np.maximum(v[:-2] + v[1:-1], 1e-6) \
            + h[1:] / np.maximum(v[1:-1] + v[2:], 1e-6)
        return j_eff * dt_mid  # |A_i - A_{i-1}| <= j * dt_mid

    for sweep in range(max_iter):
        jb = _jerk_bounds(V)
        for par in (0, 1):
            bound = (jb + V[:-2] * w0 + V[2:] * w1) / (w0 + w1)
            np.minimum(V[1:-1][par::2], bound[par::2], out=V[1:-1][par::2])
        V = _backward_envelope(_forward_envelope(V, s, ga), s, gd)
        if sweep % 8 == 7 or sweep == max_iter - 1:
            jb = _jerk_bounds(V)
            A = np.diff(V) / (2.0 * h)
            if np.all(np.abs(np.diff(A)) <= jb / _JERK_MARGIN * 0.98 + 1e-12):
                break
    return np.sqrt(np.maximum(V, 0.0))


def velocity_profile(points, limits: LimitSet, v_start: float = 0.0, v_end: float = 0.0) -> np.ndarray:
    """Curvature-aware trapezoidal speed profile with jerk rounding.

    Applies the pointwise cap min(v_max, sqrt(a_lat_max/|kappa|)), forward
    and backward acceleration passes, and an iterative corner-rounding pass
    that keeps the finite-difference jerk within j_max.
    """
    pts = list(points)
    if not pts:
        raise EmptyPath("velocity profile needs at least one point")
    s = np.array([p.s for p in pts])
    kappa = np.array([p.kappa for p in pts])
    return _velocity_profile_arrays(s, kappa, limits, v_start, v_end)


def _time_parameterize_arrays(s: np.ndarray, v: np.ndarray) -> np.ndarray:
    if len(s) != len(v):
        raise ValueError("s and v must be aligned")
    if len(v) > 2 and np.any(v[1:-1] <= 0):
        raise InteriorZeroVelocity("zero speed at a non-terminal point")
    pair = v[:-1] + v[1:]
    if np.any(pair <= 0):
        raise InteriorZeroVelocity("segment between adjacent standstill points cannot be timed")
    dt = 2.0 * np.diff(s) / pair
    return np.concatenate([[0.0], np.cumsum(dt)])


def time_parameterize(points, v: np.ndarray) -> np.ndarray:
    """Trapezoidal time integration: dt_i = 2*ds_i / (v_i + v_{i+1})."""
    s = np.array([p.s for p in points])
    return _time_parameterize_arrays(s, np.asarray(v, dtype=float))


def build_trajectory(
    waypoints,
    limits: LimitSet,
    ds: float = DEFAULT_DS_M,
    traj_id: str = "traj-0",
) -> Trajectory:
    """Full pipeline from waypoints to a timed reference trajectory."""
    wp = [(w.x, w.y) if isinstance(w, Waypoint) else (w[0], w[1]) for w in waypoints]
    spl = fit_spline(wp)
    xs, ys, heading, kappa, s = _resample_arrays(spl, ds)
    v = _velocity_profile_arrays(s, kappa, limits, 0.0, 0.0)
    t = _time_parameterize_arrays(s, v)
    traj = Trajectory(x=xs, y=ys, heading=heading, kappa=kappa, s=s, v=v, t=t,
                      id=traj_id, limits=limits)
    problems = traj.validate()
    if problems:
        raise ValueError(f"built trajectory violates invariants: {problems}")
    return traj


def generate_mrm(
    traj: Trajectory,
    s_now: float,
    v_now: float,
    limits: LimitSet,
    at_time: float = 0.0,
) -> MrmPlan:
    """Safe-stop plan from the current progress along the reference path.

    The plan keeps to the remaining reference path and brakes at d_mrm:
    v(s') = sqrt(max(0, v_now^2 - 2*d_mrm*(s'-s_now))). If the stop point
    would pass the path end the profile is rescaled to stop exactly at the
    end and flagged as clamped.
    """
    if not (-1e-9 <= s_now <= traj.length + 1e-9):
        raise ProgressOutOfRange(f"s_now {s_now} outside [0, {traj.length}]")
    if v_now < 0:
        raise ProgressOutOfRange("v_now must be non-negative")
    s_now = min(max(s_now, 0.0), traj.length)

    def sample(sq: np.ndarray):
        x = np.interp(sq, traj.s, traj.x)
        y = np.interp(sq, traj.s, traj.y)
        unwrapped = np.unwrap(traj.heading)
        hd = np.arctan2(np.sin(np.interp(sq, traj.s, unwrapped)),
                        np.cos(np.interp(sq, traj.s, unwrapped)))
        kp = np.interp(sq, traj.s, traj.kappa)
        return x, y, hd, kp

    if v_now <= 1e-12:
        sq = np.array([s_now])
        x, y, hd, kp = sample(sq)
        return MrmPlan(x=x, y=y, heading=hd, kappa=kp, s=sq, v=np.array([0.0]),
                       generated_at_s=s_now, generated_at_time=at_time)

    stop_dist = v_now**2 / (2.0 * limits.d_mrm)
    remaining = traj.length - s_now
    clamped = stop_dist > remaining + 1e-12
    if clamped:
        stop_dist = remaining
    d_eff = v_now**2 / (2.0 * stop_dist) if stop_dist > 0 else limits.d_mrm
    s_stop = s_now + stop_dist

    interior = traj.s[(traj.s > s_now + 1e-9) & (traj.s < s_stop - 1e-9)]
    sq = np.concatenate([[s_now], interior, [s_stop]])
    x, y, hd, kp = sample(sq)
    v = np.sqrt(np.maximum(0.0, v_now**2 - 2.0 * d_eff * (sq - s_now)))
    v[-1] = 0.0
    return MrmPlan(x=x, y=y, heading=hd, kappa=kp, s=sq, v=v,
                   generated_at_s=s_now, generated_at_time=at_time, clamped=clamped)
