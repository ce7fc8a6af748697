"""Operator endpoint: scripted policy, timers, retransmission, alarms.

The endpoint owns the operator state machine, message sequencing, and the
heartbeat monitor. A scripted policy stands in for the human: it places
waypoints after a configurable think time, approves after a review time,
and acknowledges emergencies before replanning from the stop position.
Retransmission of unacknowledged critical messages sits at the endpoint
level; the phase logic itself never resends.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .protocol import (
    HeartbeatMonitor,
    IllegalTransition,
    LinkHealth,
    Message,
    MessageType,
    OpEvent,
    OperatorPhase,
    draft,
    state_step_operator,
    trajectory_to_payload,
)
from .scenario import Scenario
from .trajectory import build_trajectory

log = logging.getLogger(__name__)

HEARTBEAT_PERIOD_MS = 20.0
LOSS_THRESHOLD_MS = 80.0
RESEND_PERIOD_MS = 500.0

#: scripted full solve of the bundled construction-site scenario
CONSTRUCTION_SITE_WAYPOINTS: tuple[tuple[float, float], ...] = (
    (63.5, 0.0), (53.0, -1.8), (43.5, -3.8), (33.0, -4.2),
    (23.0, -2.8), (12.0, 1.2), (2.0, 3.2),
)


def default_waypoints(scenario: Scenario) -> list[tuple[float, float]]:
    """Scripted solve for a scenario: bundled course, or straight to goal."""
    if scenario.name == "construction_site":
        return list(CONSTRUCTION_SITE_WAYPOINTS)
    if scenario.obstacles:
        raise ValueError(
            f"scenario {scenario.name!r} has obstacles; scripted waypoints required")
    sx, sy, _ = scenario.start_pose
    gx, gy = scenario.goal_xy
    n = max(2, int(math.hypot(gx - sx, gy - sy) / 10.0) + 1)
    xs = np.linspace(sx, gx, n)
    ys = np.linspace(sy, gy, n)
    return [(float(x), float(y)) for x, y in zip(xs, ys)]


@dataclass
class ScriptedOperatorConfig:
    """Timing and policy knobs for the scripted operator."""

    waypoints: list[tuple[float, float]] | None = None
    segments: list[list[tuple[float, float]]] | None = None  # verbatim per planning phase
    think_time_ms: float = 3000.0  # per waypoint
    approve_time_ms: float = 2000.0
    ack_time_ms: float = 2000.0
    takeover_time_ms: float = 500.0
    end_time_ms: float = 200.0
    estop_after_tracking_ms: float | None = None
    reject_first_check: bool = False
    max_rejects: int = 3


class OperatorEndpoint:
    """Operator half of the session; driven by on_message/on_tick."""

    def __init__(self, scenario: Scenario, config: ScriptedOperatorConfig | None = None):
        self.scenario = scenario
        self.config = config or ScriptedOperatorConfig()
        if self.config.waypoints is None and self.config.segments is None:
            self.config.waypoints = default_waypoints(scenario)
        for wps in ([self.config.waypoints] if self.config.waypoints else []) \
                + (self.config.segments or []):
            for x, y in wps:
                if not scenario.contains(x, y):
                    raise ValueError(f"scripted waypoint ({x}, {y}) outside scenario bounds")
        self.phase = OperatorPhase.IDLE
        self.seq = 0
        self.monitor = HeartbeatMonitor(
            LinkHealth(period=HEARTBEAT_PERIOD_MS, threshold=LOSS_THRESHOLD_MS))
        self.monitor_armed = False
        self.link_alarm = False
        self.phase_log: list[tuple[float, OperatorPhase]] = [(0.0, self.phase)]
        self.event_log: list[tuple[float, str]] = []
        self.alarm_log: list[tuple[float, str]] = []
        self.last_vehicle_state: dict | None = None
        self.aborted: str | None = None
        self.goal_reached = False

        self._outbox: list[Message] = []
        self._timers: list[tuple[float, OpEvent, object]] = []
        self._next_heartbeat = 0.0
        self._segment_idx = 0
        self._plan_count = 0
        self._reject_count = 0
        self._rejected_once = False
        self._pending_proposal: dict | None = None
        self._current_waypoints: list[tuple[float, float]] | None = None
        self._tracking_started_at: float | None = None
        self._estop_fired = False
        self._seen_mrm_ids: set = set()
        self._seen_path_end: set = set()
        self._resend: dict[str, tuple[float, Message]] = {}

    # -- plumbing -------------------------------------------------------------

    def _queue(self, drafts: list[Message]) -> None:
        self._outbox.extend(drafts)

    def flush(self, now: float) -> list[Message]:
        out = []
        for m in self._outbox:
            self.seq += 1
            out.append(m.stamped(self.seq, now))
        self._outbox.clear()
        return out

    def _schedule(self, due: float, event: OpEvent, data=None) -> None:
        self._timers.append((due, event, data))

    def _dispatch(self, event: OpEvent, data, now: float) -> None:
        try:
            nxt, drafts = state_step_operator(self.phase, event, data)
        except IllegalTransition as e:
            log.debug("operator ignored event: %s", e)
            self.event_log.append((now, f"illegal:{event.value}"))
            return
        self.event_log.append((now, event.value))
        self._queue(drafts)
        if nxt != self.phase:
            self.phase = nxt
            self.phase_log.append((now, nxt))
            self._on_enter(nxt, now)
        self._track_resends(event, drafts, now)

    def _track_resends(self, event: OpEvent, drafts: list[Message], now: float) -> None:
        for m in drafts:
            if m.type == MessageType.TRAJECTORY_PROPOSAL:
                self._resend["proposal"] = (now + RESEND_PERIOD_MS, m)
            elif m.type == MessageType.TRAJECTORY_APPROVE:
                self._resend["approve"] = (now + RESEND_PERIOD_MS, m)
            elif m.type == MessageType.EMERGENCY_STOP:
                self._resend["estop"] = (now + 200.0, m)
            elif m.type == MessageType.SESSION_END:
                self._resend["session_end"] = (now + RESEND_PERIOD_MS, m)

    # -- scripted behavior ------------------------------------------------------

    def _segment_waypoints(self, now: float) -> list[tuple[float, float]]:
        if self.config.segments is not None:
            # one scripted entry per planning phase, so a rejected proposal
            # moves on to the next scripted attempt
            k = min(self._plan_count, len(self.config.segments) - 1)
            self._plan_count += 1
            return list(self.config.segments[k])
        wps = list(self.config.waypoints or [])
        if self._segment_idx == 0 or self.last_vehicle_state is None:
            return wps
        # replan from the current stop position: keep the remaining solve
        cx, cy = self.last_vehicle_state["x"], self.last_vehicle_state["y"]
        dists = [math.hypot(x - cx, y - cy) for x, y in wps]
        nearest = int(np.argmin(dists))
        rest = [wp for wp in wps[nearest:] if math.hypot(wp[0] - cx, wp[1] - cy) > 2.0]
        if not rest:
            rest = [wps[-1]]
        return [(cx, cy)] + rest

    def _on_enter(self, phase: OperatorPhase, now: float) -> None:
        if phase == OperatorPhase.TAKEOVER:
            self._schedule(now + self.config.takeover_time_ms, OpEvent.UI_BEGIN_PLANNING)
        elif phase == OperatorPhase.TRAJECTORY_CREATION:
            self._resend.pop("estop", None)
            if self._goal_is_reached():
                self.goal_reached = True
                self._schedule(now + self.config.end_time_ms, OpEvent.UI_END_SESSION,
                               {"goal_reached": True})
                return
            if self._reject_count > self.config.max_rejects:
                self.aborted = "rejected"
                return
            wps = self._segment_waypoints(now)
            self._current_waypoints = wps
            think = self.config.think_time_ms * len(wps)
            self._schedule(now + think, OpEvent.UI_SUBMIT, {"waypoints": wps})
        elif phase == OperatorPhase.TRAJECTORY_APPROVAL:
            self._resend.pop("proposal", None)
            if self.config.reject_first_check and not self._rejected_once:
                self._rejected_once = True
                self._schedule(now + self.config.approve_time_ms, OpEvent.UI_REJECT,
                               {"traj_id": self._current_traj_id()})
            else:
                self._schedule(now + self.config.approve_time_ms, OpEvent.UI_APPROVE,
                               {"traj_id": self._current_traj_id()})
        elif phase == OperatorPhase.MONITORING:
            self._resend.pop("proposal", None)
        elif phase == OperatorPhase.EMERGENCY_STOPPED:
            self._resend.pop("approve", None)
            self._schedule(now + self.config.ack_time_ms, OpEvent.UI_ACK_MRM)

    def _current_traj_id(self) -> str:
        return f"seg-{self._segment_idx:03d}"

    def _goal_is_reached(self) -> bool:
        if self.last_vehicle_state is None:
            return False
        gx, gy = self.scenario.goal_xy
        vs = self.last_vehicle_state
        return (math.hypot(vs["x"] - gx, vs["y"] - gy) <= self.scenario.goal_radius
                and vs["v"] < 0.05)

    def _build_proposal(self, waypoints, now: float) -> dict | None:
        try:
            traj = build_trajectory(waypoints, self.scenario.limits,
                                    traj_id=self._current_traj_id())
        except Exception as e:
            log.warning("scripted operator failed to build trajectory: %s", e)
            self.aborted = "planning_failed"
            return None
        return trajectory_to_payload(traj, waypoints)

    # -- event intake -----------------------------------------------------------

    def on_message(self, msg: Message, now: float) -> None:
        if self.monitor_armed:
            self.monitor.note_arrival(now)
            if self.link_alarm:
                self.link_alarm = False
                self.alarm_log.append((now, "link_restored"))
        if msg.type == MessageType.HEARTBEAT:
            return
        if msg.type == MessageType.TELEOP_REQUEST:
            self.monitor_armed = True
            self.monitor.note_arrival(now)
            if self.phase != OperatorPhase.IDLE:
                # duplicate request: re-acknowledge without a phase change
                self._queue([draft(MessageType.TAKEOVER_ACK)])
                return
            self._dispatch(OpEvent.MSG_TELEOP_REQUEST, dict(msg.payload), now)
        elif msg.type == MessageType.VEHICLE_STATE:
            self.last_vehicle_state = dict(msg.payload)
            self._dispatch(OpEvent.MSG_VEHICLE_STATE, None, now)
            # fresh telemetry may reveal the goal was reached after a stop
            if (self.phase == OperatorPhase.TRAJECTORY_CREATION and not self.goal_reached
                    and self._goal_is_reached()):
                self.goal_reached = True
                self._timers = [t for t in self._timers if t[1] != OpEvent.UI_SUBMIT]
                self._schedule(now + self.config.end_time_ms, OpEvent.UI_END_SESSION,
                               {"goal_reached": True})
        elif msg.type == MessageType.TRAJECTORY_CHECKED:
            self._resend.pop("proposal", None)
            ok = msg.payload.get("status") == "ok"
            if not ok and self.phase == OperatorPhase.AWAIT_CHECK:
                self._reject_count += 1
            self._dispatch(OpEvent.MSG_CHECK_OK if ok else OpEvent.MSG_CHECK_FAIL,
                           dict(msg.payload), now)
        elif msg.type == MessageType.TRACKING_STARTED:
            if self._tracking_started_at is None:
                self._tracking_started_at = now
            self._resend.pop("approve", None)
            self._dispatch(OpEvent.MSG_TRACKING_STARTED, None, now)
        elif msg.type == MessageType.PATH_END_REACHED:
            key = msg.payload.get("traj_id")
            if key in self._seen_path_end:
                return
            self._seen_path_end.add(key)
            self._segment_idx += 1
            self._dispatch(OpEvent.MSG_PATH_END, dict(msg.payload), now)
        elif msg.type == MessageType.MRM_EXECUTED:
            stage = msg.payload.get("stage")
            self._resend.pop("estop", None)  # vehicle has acknowledged the emergency
            if stage == "completed":
                key = (msg.payload.get("cause"), msg.payload.get("stop_s"))
                if key in self._seen_mrm_ids:
                    return
                self._seen_mrm_ids.add(key)
                self._segment_idx += 1
            self.alarm_log.append((now, f"mrm_{stage}:{msg.payload.get('cause')}"))
            self._dispatch(OpEvent.MSG_MRM_EXECUTED, dict(msg.payload), now)
        elif msg.type == MessageType.SESSION_END:
            log.debug("operator ignoring unexpected session_end")
        else:
            log.debug("operator ignoring %s", msg.type)

    def on_tick(self, now: float) -> None:
        # heartbeat cadence
        if now >= self._next_heartbeat:
            self._queue([draft(MessageType.HEARTBEAT)])
            self._next_heartbeat = now + HEARTBEAT_PERIOD_MS
        # link monitor (operator side renders an alarm only)
        if self.monitor_armed and self.monitor.poll(now):
            self.link_alarm = True
            self.alarm_log.append((now, "link_lost"))
        # scripted emergency injection
        if (self.config.estop_after_tracking_ms is not None and not self._estop_fired
                and self._tracking_started_at is not None
                and now >= self._tracking_started_at + self.config.estop_after_tracking_ms
                and self.phase == OperatorPhase.MONITORING):
            self._estop_fired = True
            self._dispatch(OpEvent.UI_ESTOP, None, now)
        # due timers
        due = [t for t in self._timers if t[0] <= now]
        if due:
            self._timers = [t for t in self._timers if t[0] > now]
            for _, event, data in sorted(due, key=lambda t: t[0]):
                if event == OpEvent.UI_SUBMIT:
                    payload = self._build_proposal(data["waypoints"], now)
                    if payload is None:
                        continue
                    self._dispatch(event, payload, now)
                else:
                    self._dispatch(event, data, now)
        # retransmissions for loss robustness
        for key, (due_at, m) in list(self._resend.items()):
            if now >= due_at:
                self._queue([m])
                self._resend[key] = (now + RESEND_PERIOD_MS, m)
