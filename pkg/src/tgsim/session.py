"""Session orchestration: clock, link, endpoints, metrics, run records.

Headless mode is strictly single-threaded: one loop owns the simulated
clock (10 ms ticks), both channels, and both endpoints. Reported timing
never includes the stored cloud-handover constant.
"""

from __future__ import annotations

import dataclasses
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .link import Channel
from .operator import (
    HEARTBEAT_PERIOD_MS,
    LOSS_THRESHOLD_MS,
    OperatorEndpoint,
    ScriptedOperatorConfig,
)
from .protocol import (
    HeartbeatMonitor,
    IllegalTransition,
    LinkHealth,
    MalformedMessage,
    Message,
    MessageType,
    OperatorPhase,
    VehEvent,
    VehiclePhase,
    draft,
    state_step_vehicle,
    trajectory_from_payload,
)
from .scenario import Scenario
from .vehicle import (
    CONTROL_DT_S,
    STANDSTILL_SPEED,
    TrajectoryTracker,
    VehicleParams,
    VehicleState,
    check_trajectory,
)

log = logging.getLogger(__name__)

TICK_MS = 10.0
TELEMETRY_PERIOD_MS = 20.0
RESEND_PERIOD_MS = 500.0

#: direct-control baselines reported alongside runs; stored constants only
DC_BASELINE_TOTAL_S = 56.7
DC_BASELINE_SPEED_KMH = 4.09

METRICS_CSV_HEADER = "name,seed,t_plan_s,t_drive_s,t_total_s,v_mean_kmh,path_length_m,n_segments,n_mrm"
RECORD_CSV_HEADER = "t,x,y,psi,v,a,s_progress,phase,mrm_active"


class IncompleteRun(ValueError):
    """Metrics requested for a session that never produced phases."""


@dataclass
class RunRecord:
    """Vehicle-side run record sampled at the control rate."""

    t: list = field(default_factory=list)
    x: list = field(default_factory=list)
    y: list = field(default_factory=list)
    psi: list = field(default_factory=list)
    v: list = field(default_factory=list)
    a: list = field(default_factory=list)
    s_progress: list = field(default_factory=list)
    phase: list = field(default_factory=list)
    mrm_active: list = field(default_factory=list)

    def append(self, t, state, phase: VehiclePhase, mrm_active: bool) -> None:
        self.t.append(t)
        self.x.append(state.x)
        self.y.append(state.y)
        self.psi.append(state.psi)
        self.v.append(state.v)
        self.a.append(state.a)
        self.s_progress.append(state.s_progress)
        self.phase.append(phase.value)
        self.mrm_active.append(mrm_active)

    def arrays(self) -> dict:
        out = {k: np.array(getattr(self, k)) for k in
               ("t", "x", "y", "psi", "v", "a", "s_progress")}
        out["phase"] = list(self.phase)
        out["mrm_active"] = np.array(self.mrm_active, dtype=bool)
        return out

    def path_length(self) -> float:
        if len(self.x) < 2:
            return 0.0
        return float(np.hypot(np.diff(self.x), np.diff(self.y)).sum())

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(RECORD_CSV_HEADER + "\n")
        for i in range(len(self.t)):
            buf.write(
                f"{self.t[i]:.6f},{self.x[i]:.6f},{self.y[i]:.6f},{self.psi[i]:.6f},"
                f"{self.v[i]:.6f},{self.a[i]:.6f},{self.s_progress[i]:.6f},"
                f"{self.phase[i]},{int(self.mrm_active[i])}\n")
        return buf.getvalue()


@dataclass(frozen=True)
class SessionMetrics:
    name: str
    seed: int
    t_plan_s: float
    t_drive_s: float
    t_total_s: float
    v_mean_kmh: float
    path_length_m: float
    n_segments: int
    n_mrm: int

    def csv_row(self) -> str:
        return (f"{self.name},{self.seed},{self.t_plan_s:.6f},{self.t_drive_s:.6f},"
                f"{self.t_total_s:.6f},{self.v_mean_kmh:.6f},{self.path_length_m:.6f},"
                f"{self.n_segments},{self.n_mrm}")

    def to_csv(self) -> str:
        return METRICS_CSV_HEADER + "\n" + self.csv_row() + "\n"


class VehicleEndpoint:
    """Vehicle half of the session: check, track, stop, report."""

    def __init__(self, scenario: Scenario, params: VehicleParams | None = None,
                 k_p: float = 1.0):
        self.scenario = scenario
        self.params = params or VehicleParams()
        self.k_p = k_p
        self.phase = VehiclePhase.AUTOMATED_OPERATION
        sx, sy, spsi = scenario.start_pose
        self.state = VehicleState(x=sx, y=sy, psi=spsi)
        self.seq = 0
        self.monitor = HeartbeatMonitor(
            LinkHealth(period=HEARTBEAT_PERIOD_MS, threshold=LOSS_THRESHOLD_MS))
        self.monitor_armed = False
        self.tracker: TrajectoryTracker | None = None
        self.record = RunRecord()
        self.phase_log: list[tuple[float, VehiclePhase]] = [(0.0, self.phase)]
        self.check_reports: list[dict] = []
        self.n_segments = 0
        self.n_mrm = 0
        self.mrm_switch_log: list[tuple[float, str]] = []  # (switch time, cause)
        self.loss_log: list[tuple[float, float]] = []  # (detection time, silence gap)
        self.session_complete = False

        self._outbox: list[Message] = []
        self._next_heartbeat = 0.0
        self._next_telemetry = 0.0
        self._mrm_cause: str | None = None
        self._trivial_mrm_pending = False
        self._handover_pending = False
        self._resend: dict[str, tuple[float, Message]] = {}
        self._last_completion_payload: dict | None = None

    # -- plumbing -------------------------------------------------------------

    def flush(self, now: float) -> list[Message]:
        out = []
        for m in self._outbox:
            self.seq += 1
            out.append(m.stamped(self.seq, now))
        self._outbox.clear()
        return out

    def _dispatch(self, event: VehEvent, data, now: float) -> None:
        try:
            nxt, drafts = state_step_vehicle(self.phase, event, data)
        except IllegalTransition as e:
            log.debug("vehicle ignored event: %s", e)
            return
        self._outbox.extend(drafts)
        prev = self.phase
        if nxt != prev:
            self.phase = nxt
            self.phase_log.append((now, nxt))
            self._on_enter(nxt, prev, event, data, now)
        self._track_resends(drafts, now)

    def _track_resends(self, drafts: list[Message], now: float) -> None:
        for m in drafts:
            if m.type == MessageType.TELEOP_REQUEST:
                self._resend["teleop_request"] = (now + RESEND_PERIOD_MS, m)
            elif m.type == MessageType.TRAJECTORY_CHECKED:
                self._resend["checked"] = (now + RESEND_PERIOD_MS, m)
            elif m.type == MessageType.PATH_END_REACHED:
                self._resend["path_end"] = (now + RESEND_PERIOD_MS, m)
            elif m.type == MessageType.MRM_EXECUTED and m.payload.get("stage") == "completed":
                self._resend["mrm_done"] = (now + RESEND_PERIOD_MS, m)

    def _on_enter(self, phase: VehiclePhase, prev: VehiclePhase,
                  event: VehEvent, data, now: float) -> None:
        if phase == VehiclePhase.EMERGENCY_STOP:
            cause = (data or {}).get("cause", "unknown")
            self._mrm_cause = cause
            if self.tracker is not None and self.state.v > STANDSTILL_SPEED:
                self.tracker.trigger_mrm(cause, now / 1000.0)
                self.mrm_switch_log.append((now, cause))
            else:
                # standstill emergency: trivially complete on the next tick
                self._trivial_mrm_pending = True
                self.mrm_switch_log.append((now, cause))
        elif phase == VehiclePhase.TRAJECTORY_TRACKING:
            self.n_segments += 1
            # progress is per-trajectory; a new segment starts from zero
            self.state = dataclasses.replace(self.state, s_progress=0.0)
        elif phase == VehiclePhase.HANDOVER:
            self._handover_pending = True
        elif phase == VehiclePhase.AWAIT_TRAJECTORY and prev == VehiclePhase.TRAJECTORY_CHECK:
            pass
        if phase == VehiclePhase.AWAIT_TRAJECTORY:
            # a finished segment or maneuver ends the tracking context
            if event in (VehEvent.PATH_END, VehEvent.MRM_COMPLETE):
                self.tracker = None

    # -- event intake -----------------------------------------------------------

    def on_message(self, msg: Message, now: float) -> None:
        if self.monitor_armed:
            self.monitor.note_arrival(now)
        if msg.type == MessageType.HEARTBEAT:
            return
        if msg.type == MessageType.TAKEOVER_ACK:
            self._resend.pop("teleop_request", None)
            self.monitor_armed = True
            self.monitor.note_arrival(now)
            self._dispatch(VehEvent.MSG_TAKEOVER_ACK, None, now)
        elif msg.type == MessageType.TRAJECTORY_PROPOSAL:
            self._resend.pop("path_end", None)
            self._resend.pop("mrm_done", None)
            if self.phase != VehiclePhase.AWAIT_TRAJECTORY:
                log.debug("vehicle ignoring proposal in %s", self.phase)
                return
            self._dispatch(VehEvent.MSG_PROPOSAL, None, now)
            self._run_check(msg, now)
        elif msg.type == MessageType.TRAJECTORY_APPROVE:
            self._dispatch(VehEvent.MSG_APPROVE, {"traj_id": msg.payload.get("traj_id")}, now)
        elif msg.type == MessageType.TRAJECTORY_REJECT:
            self.tracker = None
            self._dispatch(VehEvent.MSG_REJECT, None, now)
        elif msg.type == MessageType.EMERGENCY_STOP:
            self._dispatch(VehEvent.MSG_ESTOP, {"cause": "operator_stop"}, now)
        elif msg.type == MessageType.SESSION_END:
            self._dispatch(VehEvent.MSG_SESSION_END, None, now)
        else:
            log.debug("vehicle ignoring %s", msg.type)

    def _run_check(self, msg: Message, now: float) -> None:
        try:
            traj, waypoints = trajectory_from_payload(msg.payload)
        except MalformedMessage as e:
            log.warning("malformed proposal: %s", e)
            report = {"status": "rejected", "reasons": ["IntegrityError"],
                      "traj_id": msg.payload.get("id")}
            self.check_reports.append(report)
            self._dispatch(VehEvent.CHECK_FAILED, report, now)
            return
        rep = check_trajectory(traj, self.params, self.scenario)
        report = rep.to_payload(traj.id)
        self.check_reports.append(report)
        if rep.ok:
            self.tracker = TrajectoryTracker(traj, self.params, k_p=self.k_p)
            self._dispatch(VehEvent.CHECK_PASSED, report, now)
        else:
            self.tracker = None
            self._dispatch(VehEvent.CHECK_FAILED, report, now)

    # -- per-tick behavior --------------------------------------------------------

    def _emit_telemetry(self, now: float) -> None:
        traj_id = self.tracker.traj.id if self.tracker else None
        self._outbox.append(draft(MessageType.VEHICLE_STATE, {
            "x": self.state.x, "y": self.state.y, "psi": self.state.psi,
            "v": self.state.v, "a": self.state.a,
            "s_progress": self.state.s_progress, "traj_id": traj_id,
        }))

    def on_tick(self, now: float) -> None:
        if now >= self._next_heartbeat:
            self._outbox.append(draft(MessageType.HEARTBEAT))
            self._next_heartbeat = now + HEARTBEAT_PERIOD_MS

        if self.monitor_armed and self.monitor.poll(now):
            self.loss_log.append((now, now - self.monitor.health.last_heard))
            self._dispatch(VehEvent.LINK_LOST, {"cause": "network_loss"}, now)

        if self._handover_pending:
            self._handover_pending = False
            self._dispatch(VehEvent.HANDOVER_COMPLETE, None, now)
            self.session_complete = True

        if self._trivial_mrm_pending:
            self._trivial_mrm_pending = False
            payload = {"cause": self._mrm_cause, "stop_s": self.state.s_progress,
                       "stop_x": self.state.x, "stop_y": self.state.y}
            self.n_mrm += 1
            self._dispatch(VehEvent.MRM_COMPLETE, payload, now)
            self._emit_telemetry(now)

        tracking = self.phase in (VehiclePhase.TRAJECTORY_TRACKING, VehiclePhase.EMERGENCY_STOP)
        if tracking and self.tracker is not None:
            out = self.tracker.step(self.state, CONTROL_DT_S)
            self.state = out.state
            if out.diverged:
                self._dispatch(VehEvent.COLLISION_RISK, {"cause": "collision_risk"}, now)
            if out.path_end:
                self.state = dataclasses.replace(self.state, v=0.0)
                self._emit_telemetry(now)  # stop state must precede the notification
                self._dispatch(VehEvent.PATH_END,
                               {"traj_id": self.tracker.traj.id if self.tracker else None,
                                "s_final": self.state.s_progress}, now)
            elif out.mrm_done:
                payload = {"cause": self._mrm_cause, "stop_s": self.state.s_progress,
                           "stop_x": self.state.x, "stop_y": self.state.y}
                self.n_mrm += 1
                self._emit_telemetry(now)
                self._dispatch(VehEvent.MRM_COMPLETE, payload, now)
            elif now >= self._next_telemetry:
                self._emit_telemetry(now)
                self._next_telemetry = now + TELEMETRY_PERIOD_MS

        for key, (due_at, m) in list(self._resend.items()):
            if now >= due_at:
                self._outbox.append(m)
                self._resend[key] = (now + RESEND_PERIOD_MS, m)

        mrm_active = self.tracker.mrm_active if self.tracker else False
        self.record.append(now / 1000.0, self.state, self.phase, mrm_active)


@dataclass
class SessionResult:
    scenario: Scenario
    seed: int
    exit_reason: str
    sim_time_s: float
    operator: OperatorEndpoint
    vehicle: VehicleEndpoint
    metrics: SessionMetrics | None = None
    message_log: list = field(default_factory=list)


class Session:
    """One teleoperation session on a simulated clock."""

    def __init__(self, scenario: Scenario, operator_cfg: ScriptedOperatorConfig | None = None,
                 seed: int = 0, sim_timeout_s: float = 600.0,
                 params: VehicleParams | None = None, k_p: float = 1.0,
                 operator: OperatorEndpoint | None = None):
        self.scenario = scenario
        self.seed = seed
        cfg = dataclasses.replace(scenario.channel, seed=scenario.channel.seed + seed)
        self.channel_cfg = cfg
        self.op_to_veh = Channel(cfg, "op2veh")
        self.veh_to_op = Channel(cfg, "veh2op")
        self.operator = operator or OperatorEndpoint(scenario, operator_cfg)
        self.vehicle = VehicleEndpoint(scenario, params=params, k_p=k_p)
        self.sim_timeout_ms = sim_timeout_s * 1000.0
        self.now = 0.0
        self._started = False
        self.message_log: list[tuple[float, str, str, int]] = []

    def tick(self, inject=None) -> None:
        if not self._started:
            self._started = True
            self.vehicle._dispatch(VehEvent.DISENGAGE,
                                   {"x": self.scenario.start_pose[0],
                                    "y": self.scenario.start_pose[1],
                                    "psi": self.scenario.start_pose[2]}, self.now)
            for m in self.vehicle.flush(self.now):
                self.message_log.append((self.now, "veh2op", m.type.value, m.seq))
                self.veh_to_op.send(m, at=self.now)
        self.now += TICK_MS
        for msg in self.op_to_veh.advance_clock(self.now):
            self.vehicle.on_message(msg, self.now)
        for msg in self.veh_to_op.advance_clock(self.now):
            self.operator.on_message(msg, self.now)
        if inject is not None:
            inject(self.now)
        self.operator.on_tick(self.now)
        self.vehicle.on_tick(self.now)
        for m in self.operator.flush(self.now):
            self.message_log.append((self.now, "op2veh", m.type.value, m.seq))
            self.op_to_veh.send(m, at=self.now)
        for m in self.vehicle.flush(self.now):
            self.message_log.append((self.now, "veh2op", m.type.value, m.seq))
            self.veh_to_op.send(m, at=self.now)

    @property
    def done(self) -> bool:
        return (self.vehicle.session_complete or self.operator.aborted is not None
                or self.now >= self.sim_timeout_ms)

    def run(self) -> SessionResult:
        while not self.done:
            self.tick()
        if self.vehicle.session_complete:
            reason = "completed"
        elif self.operator.aborted is not None:
            reason = self.operator.aborted
        else:
            reason = "timeout"
        result = SessionResult(scenario=self.scenario, seed=self.seed, exit_reason=reason,
                               sim_time_s=self.now / 1000.0, operator=self.operator,
                               vehicle=self.vehicle, message_log=self.message_log)
        result.metrics = compute_metrics(result)
        return result


def phase_durations(phase_log: list[tuple[float, object]], end_ms: float) -> dict:
    out: dict = {}
    for (t0, ph), (t1, _) in zip(phase_log, phase_log[1:] + [(end_ms, None)]):
        out[ph] = out.get(ph, 0.0) + (t1 - t0)
    return out


def compute_metrics(result: SessionResult) -> SessionMetrics:
    """Phase timing from operator transitions, distance from the run record."""
    op = result.operator
    veh = result.vehicle
    if len(op.phase_log) < 2 and not veh.record.t:
        raise IncompleteRun("session produced no activity")
    end_ms = result.sim_time_s * 1000.0
    dur = phase_durations(op.phase_log, end_ms)
    t_plan = (dur.get(OperatorPhase.TRAJECTORY_CREATION, 0.0)
              + dur.get(OperatorPhase.TRAJECTORY_APPROVAL, 0.0)) / 1000.0
    t_drive = dur.get(OperatorPhase.MONITORING, 0.0) / 1000.0
    path_length = veh.record.path_length()
    v_mean = 3.6 * path_length / t_drive if t_drive > 0 else 0.0
    return SessionMetrics(
        name=result.scenario.name,
        seed=result.seed,
        t_plan_s=t_plan,
        t_drive_s=t_drive,
        t_total_s=t_plan + t_drive,
        v_mean_kmh=v_mean,
        path_length_m=path_length,
        n_segments=veh.n_segments,
        n_mrm=veh.n_mrm,
    )


def run_session(scenario: Scenario, operator_cfg: ScriptedOperatorConfig | None = None,
                seed: int = 0, sim_timeout_s: float = 600.0,
                params: VehicleParams | None = None, k_p: float = 1.0) -> SessionResult:
    """Headless scripted session; deterministic for a fixed (scenario, cfg, seed)."""
    return Session(scenario, operator_cfg, seed=seed, sim_timeout_s=sim_timeout_s,
                   params=params, k_p=k_p).run()
