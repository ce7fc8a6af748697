"""Simulated vehicle: dynamics, tracking controller, checks, safe-stop execution.

The model is a kinematic bicycle with first-order actuator lag, stepped at
a fixed 10 ms period. Lateral tracking is pure pursuit with a speed-scaled
lookahead; longitudinal tracking is feedforward acceleration plus a
proportional speed term. A fresh safe-stop plan is regenerated on every
tracking step so an emergency switch is never stale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import geometry
from .trajectory import LimitSet, MrmPlan, Trajectory, generate_mrm

CONTROL_DT_S = 0.01
PATH_END_TOLERANCE_M = 0.1
STANDSTILL_SPEED = 0.05
DIVERGENCE_LIMIT_M = 1.0
CORRIDOR_MARGIN_M = 0.2


@dataclass(frozen=True)
class VehicleParams:
    wheelbase: float = 2.7
    max_steer: float = math.atan(0.675)  # tan(max_steer)/wheelbase = 0.25 1/m
    actuator_lag: float = 0.1
    width: float = 2.2
    length: float = 4.5

    def __post_init__(self):
        for name in ("wheelbase", "max_steer", "width", "length"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.actuator_lag < 0:
            raise ValueError("actuator_lag must be >= 0")

    @property
    def kappa_max(self) -> float:
        return math.tan(self.max_steer) / self.wheelbase


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    psi: float
    v: float = 0.0
    a: float = 0.0
    s_progress: float = 0.0
    t: float = 0.0
    delta: float = 0.0  # actual steer angle after actuator lag


def vehicle_step(state: VehicleState, steer_cmd: float, accel_cmd: float,
                 dt: float, params: VehicleParams) -> VehicleState:
    """One kinematic bicycle step with first-order lag on both commands."""
    steer_cmd = max(-params.max_steer, min(params.max_steer, steer_cmd))
    if params.actuator_lag > 0:
        alpha = dt / (params.actuator_lag + dt)
    else:
        alpha = 1.0
    delta = state.delta + (steer_cmd - state.delta) * alpha
    a = state.a + (accel_cmd - state.a) * alpha
    x = state.x + state.v * math.cos(state.psi) * dt
    y = state.y + state.v * math.sin(state.psi) * dt
    psi = state.psi + state.v * math.tan(delta) / params.wheelbase * dt
    v = max(0.0, state.v + a * dt)
    return replace(state, x=x, y=y, psi=psi, v=v, a=a, delta=delta, t=state.t + dt)


def project_progress(x: float, y: float, xs: np.ndarray, ys: np.ndarray,
                     s: np.ndarray, hint: int, window: int = 60) -> tuple[float, float, int]:
    """Project a position onto the path near a hint index.

    Returns (arc position, cross-track distance, segment index). The search
    window is local so progress stays monotone and the cost bounded.
    """
    lo = max(0, hint - 2)
    hi = min(len(xs) - 1, hint + window)
    if hi <= lo:
        lo, hi = max(0, len(xs) - 2), len(xs) - 1
    ax, ay = xs[lo:hi], ys[lo:hi]
    bx, by = xs[lo + 1:hi + 1], ys[lo + 1:hi + 1]
    dx, dy = bx - ax, by - ay
    L2 = np.maximum(dx * dx + dy * dy, 1e-12)
    u = np.clip(((x - ax) * dx + (y - ay) * dy) / L2, 0.0, 1.0)
    px, py = ax + u * dx, ay + u * dy
    d2 = (x - px) ** 2 + (y - py) ** 2
    i = int(np.argmin(d2))
    seg = lo + i
    s_here = s[seg] + u[i] * (s[seg + 1] - s[seg])
    return float(s_here), float(math.sqrt(d2[i])), seg


def lookahead_distance(v: float) -> float:
    return min(6.0, max(1.0, 0.5 + 0.8 * v))


def controller_step(state: VehicleState, ref_xy: tuple[np.ndarray, np.ndarray, np.ndarray],
                    v_ref: float, a_ff: float, params: VehicleParams,
                    s_progress: float, k_p: float = 1.0) -> tuple[float, float]:
    """Pure pursuit steering plus feedforward/P longitudinal command."""
    xs, ys, s = ref_xy
    ld = lookahead_distance(state.v)
    s_target = min(s_progress + ld, float(s[-1]))
    tx = float(np.interp(s_target, s, xs))
    ty = float(np.interp(s_target, s, ys))
    alpha = geometry.wrap_angle(math.atan2(ty - state.y, tx - state.x) - state.psi)
    dist = max(math.hypot(tx - state.x, ty - state.y), 0.3)
    kappa_cmd = 2.0 * math.sin(alpha) / dist
    steer = math.atan(params.wheelbase * kappa_cmd)
    steer = max(-params.max_steer, min(params.max_steer, steer))
    accel = a_ff + k_p * (v_ref - state.v)
    return steer, accel


@dataclass
class TrackStep:
    state: VehicleState
    cross_track: float
    path_end: bool = False
    diverged: bool = False
    mrm_done: bool = False


class TrajectoryTracker:
    """Per-step tracking of one reference trajectory with MRM readiness."""

    def __init__(self, traj: Trajectory, params: VehicleParams,
                 limits: LimitSet | None = None, k_p: float = 1.0):
        self.traj = traj
        self.params = params
        self.limits = limits or traj.limits
        self.k_p = k_p
        self.mrm_plan: MrmPlan | None = None
        self.mrm_active = False
        self.mrm_cause: str | None = None
        self._hint = 0
        self._ref = (traj.x, traj.y, traj.s)

    def trigger_mrm(self, cause: str, now_s: float) -> MrmPlan:
        """Switch the longitudinal reference to the current stop plan."""
        if self.mrm_plan is None:
            self.mrm_plan = generate_mrm(self.traj, 0.0, 0.0, self.limits, at_time=now_s)
        self.mrm_active = True
        self.mrm_cause = cause
        return self.mrm_plan

    def step(self, state: VehicleState, dt: float = CONTROL_DT_S) -> TrackStep:
        s_prog, cross, seg = project_progress(
            state.x, state.y, self.traj.x, self.traj.y, self.traj.s, self._hint)
        s_prog = max(s_prog, state.s_progress)  # progress never decreases
        self._hint = seg

        if not self.mrm_active:
            # a fresh stop plan every step keeps the emergency switch current
            self.mrm_plan = generate_mrm(self.traj, s_prog, state.v, self.limits,
                                         at_time=state.t)

        if self.mrm_active and self.mrm_plan is not None:
            plan = self.mrm_plan
            v_ref = plan.v_at(s_prog)
            if s_prog >= plan.stop_s - 1e-9 or state.v <= STANDSTILL_SPEED:
                v_ref = 0.0
            a_ff = -self.limits.d_mrm if state.v > STANDSTILL_SPEED else 0.0
        else:
            v_ref = self.traj.v_at(s_prog)
            a_ff = self.traj.accel_at(s_prog)

        steer, accel = controller_step(state, self._ref, v_ref, a_ff, self.params,
                                       s_prog, self.k_p)
        new_state = vehicle_step(state, steer, accel, dt, self.params)
        new_state = replace(new_state, s_progress=max(s_prog, state.s_progress))

        out = TrackStep(state=new_state, cross_track=cross)
        if self.mrm_active:
            if new_state.v <= STANDSTILL_SPEED:
                out.mrm_done = True
                out.state = replace(new_state, v=0.0, a=0.0)
        else:
            if cross > DIVERGENCE_LIMIT_M:
                out.diverged = True
            elif (s_prog >= self.traj.length - PATH_END_TOLERANCE_M
                    and new_state.v < STANDSTILL_SPEED):
                out.path_end = True
                out.state = replace(new_state, v=0.0, a=0.0)
        return out


def tracking_loop(traj: Trajectory, state0: VehicleState,
                  params: VehicleParams | None = None,
                  hooks=None, dt: float = CONTROL_DT_S,
                  max_time_s: float = 600.0, k_p: float = 1.0) -> dict:
    """Headless tracking run without a network link.

    ``hooks(t, state, tracker)`` may return "estop" or "loss" to inject an
    emergency mid-run. Returns a run record with per-step arrays and the
    list of discrete events.
    """
    params = params or VehicleParams()
    tracker = TrajectoryTracker(traj, params, k_p=k_p)
    state = state0
    rec = {k: [] for k in ("t", "x", "y", "psi", "v", "a", "s_progress",
                           "cross_track", "mrm_active")}
    events: list[tuple[float, str]] = []
    steps = int(max_time_s / dt)
    for _ in range(steps):
        if hooks is not None and not tracker.mrm_active:
            cmd = hooks(state.t, state, tracker)
            if cmd in ("estop", "loss"):
                cause = "operator_stop" if cmd == "estop" else "network_loss"
                tracker.trigger_mrm(cause, state.t)
                events.append((state.t, f"mrm_triggered:{cause}"))
        out = tracker.step(state, dt)
        state = out.state
        for key, val in (("t", state.t), ("x", state.x), ("y", state.y),
                         ("psi", state.psi), ("v", state.v), ("a", state.a),
                         ("s_progress", state.s_progress),
                         ("cross_track", out.cross_track),
                         ("mrm_active", tracker.mrm_active)):
            rec[key].append(val)
        if out.diverged:
            tracker.trigger_mrm("collision_risk", state.t)
            events.append((state.t, "mrm_triggered:collision_risk"))
        if out.mrm_done:
            events.append((state.t, "mrm_done"))
            break
        if out.path_end:
            events.append((state.t, "path_end"))
            break
    rec = {k: (np.array(v) if k != "mrm_active" else np.array(v, dtype=bool))
           for k, v in rec.items()}
    rec["events"] = events
    return rec


# --- vehicle-side trajectory check -------------------------------------------


CHECK_INTEGRITY = "IntegrityError"
CHECK_CURVATURE = "CurvatureExceeded"
CHECK_VELOCITY = "VelocityExceeded"
CHECK_PROFILE = "ProfileInfeasible"
CHECK_BOUNDS = "OffScenarioBounds"
CHECK_OBSTACLE = "ObstacleConflict"


@dataclass(frozen=True)
class CheckReport:
    status: str
    reasons: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_payload(self, traj_id: str | None = None) -> dict:
        return {"status": self.status, "reasons": list(self.reasons), "traj_id": traj_id}


def central_derivative(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Three-point finite difference on an unequally spaced grid."""
    d = np.empty_like(y)
    d0 = t[1:-1] - t[:-2]
    d1 = t[2:] - t[1:-1]
    d[1:-1] = (y[2:] * d0**2 - y[:-2] * d1**2 + y[1:-1] * (d1**2 - d0**2)) \
        / (d0 * d1 * (d0 + d1))
    d[0] = (y[1] - y[0]) / (t[1] - t[0])
    d[-1] = (y[-1] - y[-2]) / (t[-1] - t[-2])
    return d


def profile_feasible(traj: Trajectory, tol: float = 0.05) -> bool:
    """Finite-difference re-check of the received velocity profile."""
    if traj.n < 3:
        return True
    lim = traj.limits
    a = central_derivative(traj.v, traj.t)
    if np.any(a > lim.a_max * (1 + tol) + 1e-9) or np.any(-a > lim.d_max * (1 + tol) + 1e-9):
        return False
    j = central_derivative(a, traj.t)
    return not np.any(np.abs(j) > lim.j_max * (1 + tol) + 1e-9)


def check_trajectory(traj: Trajectory, params: VehicleParams,
                     scenario=None, tol: float = 0.05) -> CheckReport:
    """Integrity, feasibility, and safety checks on a received proposal.

    Failures are report entries, never exceptions; the caller relays the
    report back to the operator.
    """
    reasons: list[str] = []

    n = traj.n
    aligned = (len(traj.x) == len(traj.y) == len(traj.heading) == len(traj.kappa)
               == len(traj.s) == len(traj.v) == len(traj.t))
    if not aligned or n < 2:
        return CheckReport(status="rejected", reasons=(CHECK_INTEGRITY,))
    finite = all(np.isfinite(arr).all() for arr in
                 (traj.x, traj.y, traj.heading, traj.kappa, traj.s, traj.v, traj.t))
    if (not finite or np.any(np.diff(traj.s) <= 0) or traj.t[0] != 0.0
            or np.any(np.diff(traj.t) <= 0) or abs(traj.v[0]) > 1e-9
            or abs(traj.v[-1]) > 1e-9 or np.any(traj.v < -1e-12)):
        reasons.append(CHECK_INTEGRITY)

    if finite:
        if np.any(np.abs(traj.kappa) > params.kappa_max + 1e-9):
            reasons.append(CHECK_CURVATURE)
        cap = np.minimum(traj.limits.v_max,
                         np.sqrt(traj.limits.a_lat_max / np.maximum(np.abs(traj.kappa), 1e-6)))
        if np.any(traj.v > cap + 1e-9):
            reasons.append(CHECK_VELOCITY)
        if CHECK_INTEGRITY not in reasons and not profile_feasible(traj, tol):
            reasons.append(CHECK_PROFILE)

    if scenario is not None and finite:
        inside = all(geometry.point_in_polygon(float(x), float(y), scenario.bounds)
                     for x, y in zip(traj.x, traj.y))
        if not inside:
            reasons.append(CHECK_BOUNDS)
        clearance_needed = params.width / 2.0 + CORRIDOR_MARGIN_M
        for poly in scenario.obstacles:
            if geometry.polyline_clearance(traj.x, traj.y, poly) < clearance_needed:
                reasons.append(CHECK_OBSTACLE)
                break

    if reasons:
        return CheckReport(status="rejected", reasons=tuple(dict.fromkeys(reasons)))
    return CheckReport(status="ok")
