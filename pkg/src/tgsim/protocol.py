"""Wire vocabulary and the coupled operator/vehicle state machines.

Messages are length-prefixed canonical JSON (4-byte big-endian size,
UTF-8 body) with exactly the top-level fields `type`, `seq`,
`sent_at_ms`, `payload`. The two state machines are pure transition
tables; endpoints own sequencing, timers, and heartbeat monitoring.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Callable, Mapping

import numpy as np

from .trajectory import LimitSet, Trajectory

PROTOCOL_VERSION = 1
_HEADER = struct.Struct(">I")
MAX_FRAME_BYTES = 4 * 1024 * 1024


class MalformedMessage(ValueError):
    """Frame fails structural validation."""


class IllegalTransition(RuntimeError):
    """Event is not legal in the current phase; phase must stay unchanged."""


class MessageType(str, Enum):
    TELEOP_REQUEST = "teleop_request"
    TAKEOVER_ACK = "takeover_ack"
    TRAJECTORY_PROPOSAL = "trajectory_proposal"
    TRAJECTORY_CHECKED = "trajectory_checked"
    TRAJECTORY_APPROVE = "trajectory_approve"
    TRAJECTORY_REJECT = "trajectory_reject"
    TRACKING_STARTED = "tracking_started"
    VEHICLE_STATE = "vehicle_state"
    PATH_END_REACHED = "path_end_reached"
    EMERGENCY_STOP = "emergency_stop"
    MRM_EXECUTED = "mrm_executed"
    HEARTBEAT = "heartbeat"
    SESSION_END = "session_end"


@dataclass(frozen=True)
class Message:
    type: MessageType
    seq: int
    sent_at_ms: float
    payload: Mapping[str, Any]

    def stamped(self, seq: int, sent_at_ms: float) -> "Message":
        return replace(self, seq=seq, sent_at_ms=sent_at_ms)


def draft(mtype: MessageType, payload: Mapping[str, Any] | None = None) -> Message:
    """Unstamped message; the sending endpoint assigns seq and timestamp."""
    return Message(type=mtype, seq=0, sent_at_ms=0.0, payload=payload or {})


def encode(msg: Message) -> bytes:
    body = json.dumps(
        {"type": msg.type.value, "seq": msg.seq, "sent_at_ms": msg.sent_at_ms,
         "payload": msg.payload},
        sort_keys=True, separators=(",", ":"), allow_nan=False,
    ).encode("utf-8")
    return _HEADER.pack(len(body)) + body


def decode(data: bytes) -> Message:
    if len(data) < _HEADER.size:
        raise MalformedMessage("frame shorter than length prefix")
    (size,) = _HEADER.unpack(data[: _HEADER.size])
    body = data[_HEADER.size:]
    if size > MAX_FRAME_BYTES:
        raise MalformedMessage(f"declared size {size} exceeds frame limit")
    if len(body) != size:
        raise MalformedMessage(f"declared size {size} != body size {len(body)}")
    try:
        obj = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise MalformedMessage(f"invalid JSON body: {e}") from e
    if not isinstance(obj, dict) or set(obj.keys()) != {"type", "seq", "sent_at_ms", "payload"}:
        raise MalformedMessage("top-level fields must be exactly type/seq/sent_at_ms/payload")
    try:
        mtype = MessageType(obj["type"])
    except ValueError:
        raise MalformedMessage(f"unknown message type {obj['type']!r}") from None
    seq = obj["seq"]
    if not isinstance(seq, int) or isinstance(seq, bool) or seq < 0:
        raise MalformedMessage("seq must be a non-negative integer")
    if not isinstance(obj["sent_at_ms"], (int, float)) or isinstance(obj["sent_at_ms"], bool):
        raise MalformedMessage("sent_at_ms must be a number")
    if not isinstance(obj["payload"], dict):
        raise MalformedMessage("payload must be an object")
    return Message(type=mtype, seq=seq, sent_at_ms=float(obj["sent_at_ms"]), payload=obj["payload"])


def trajectory_to_payload(traj: Trajectory, waypoints) -> dict:
    return {
        "id": traj.id,
        "waypoints": [{"x": float(x), "y": float(y)} for x, y in waypoints],
        "points": [
            {"x": float(traj.x[i]), "y": float(traj.y[i]), "heading": float(traj.heading[i]),
             "kappa": float(traj.kappa[i]), "s": float(traj.s[i])}
            for i in range(traj.n)
        ],
        "v": [float(v) for v in traj.v],
        "t": [float(t) for t in traj.t],
        "limits": traj.limits.to_payload(),
    }


def trajectory_from_payload(payload: Mapping[str, Any]) -> tuple[Trajectory, list[tuple[float, float]]]:
    """Rebuild a Trajectory from a proposal payload.

    Structural problems raise MalformedMessage; semantic problems (invariant
    violations) are left for the vehicle-side check to report.
    """
    try:
        pts = payload["points"]
        traj = Trajectory(
            x=np.array([p["x"] for p in pts], dtype=float),
            y=np.array([p["y"] for p in pts], dtype=float),
            heading=np.array([p["heading"] for p in pts], dtype=float),
            kappa=np.array([p["kappa"] for p in pts], dtype=float),
            s=np.array([p["s"] for p in pts], dtype=float),
            v=np.array(payload["v"], dtype=float),
            t=np.array(payload["t"], dtype=float),
            id=str(payload["id"]),
            limits=LimitSet.from_payload(payload["limits"]),
        )
        waypoints = [(float(w["x"]), float(w["y"])) for w in payload["waypoints"]]
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedMessage(f"bad trajectory_proposal payload: {e}") from e
    return traj, waypoints


# --- state machines ---------------------------------------------------------


class OperatorPhase(str, Enum):
    IDLE = "Idle"
    TAKEOVER = "Takeover"
    TRAJECTORY_CREATION = "TrajectoryCreation"
    AWAIT_CHECK = "AwaitCheck"
    TRAJECTORY_APPROVAL = "TrajectoryApproval"
    MONITORING = "Monitoring"
    EMERGENCY_STOPPED = "EmergencyStopped"
    HANDOVER = "Handover"


class VehiclePhase(str, Enum):
    AUTOMATED_OPERATION = "AutomatedOperation"
    AWAIT_TRAJECTORY = "AwaitTrajectory"
    TRAJECTORY_CHECK = "TrajectoryCheck"
    AWAIT_APPROVAL = "AwaitApproval"
    TRAJECTORY_TRACKING = "TrajectoryTracking"
    EMERGENCY_STOP = "EmergencyStop"
    HANDOVER = "Handover"


class OpEvent(Enum):
    """Operator-side events: inbound messages, UI commands, timers."""

    MSG_TELEOP_REQUEST = "msg_teleop_request"
    MSG_CHECK_OK = "msg_check_ok"
    MSG_CHECK_FAIL = "msg_check_fail"
    MSG_TRACKING_STARTED = "msg_tracking_started"
    MSG_PATH_END = "msg_path_end"
    MSG_MRM_EXECUTED = "msg_mrm_executed"
    MSG_VEHICLE_STATE = "msg_vehicle_state"
    MSG_HEARTBEAT = "msg_heartbeat"
    UI_BEGIN_PLANNING = "ui_begin_planning"
    UI_SUBMIT = "ui_submit"
    UI_APPROVE = "ui_approve"
    UI_REJECT = "ui_reject"
    UI_ESTOP = "ui_estop"
    UI_ACK_MRM = "ui_ack_mrm"
    UI_END_SESSION = "ui_end_session"
    TIMER_LINK_LOST = "timer_link_lost"


class VehEvent(Enum):
    """Vehicle-side events: inbound messages, internal triggers, timers."""

    MSG_TAKEOVER_ACK = "msg_takeover_ack"
    MSG_PROPOSAL = "msg_proposal"
    MSG_APPROVE = "msg_approve"
    MSG_REJECT = "msg_reject"
    MSG_ESTOP = "msg_estop"
    MSG_SESSION_END = "msg_session_end"
    MSG_HEARTBEAT = "msg_heartbeat"
    DISENGAGE = "disengage"
    CHECK_PASSED = "check_passed"
    CHECK_FAILED = "check_failed"
    PATH_END = "path_end"
    MRM_COMPLETE = "mrm_complete"
    COLLISION_RISK = "collision_risk"
    LINK_LOST = "link_lost"
    HANDOVER_COMPLETE = "handover_complete"


#: events that are legal (and ignored) in every phase of their machine
OP_ALWAYS_OK = frozenset({OpEvent.MSG_VEHICLE_STATE, OpEvent.MSG_HEARTBEAT,
                          OpEvent.TIMER_LINK_LOST})
VEH_ALWAYS_OK = frozenset({VehEvent.MSG_HEARTBEAT})

_OP = OperatorPhase
_VP = VehiclePhase

#: (phase, event) -> next phase; everything else is an IllegalTransition
OPERATOR_TRANSITIONS: dict[tuple[OperatorPhase, OpEvent], OperatorPhase] = {
    (_OP.IDLE, OpEvent.MSG_TELEOP_REQUEST): _OP.TAKEOVER,
    (_OP.TAKEOVER, OpEvent.UI_BEGIN_PLANNING): _OP.TRAJECTORY_CREATION,
    (_OP.TRAJECTORY_CREATION, OpEvent.UI_SUBMIT): _OP.AWAIT_CHECK,
    (_OP.TRAJECTORY_CREATION, OpEvent.UI_END_SESSION): _OP.HANDOVER,
    (_OP.TRAJECTORY_CREATION, OpEvent.MSG_MRM_EXECUTED): _OP.EMERGENCY_STOPPED,
    (_OP.AWAIT_CHECK, OpEvent.MSG_CHECK_OK): _OP.TRAJECTORY_APPROVAL,
    (_OP.AWAIT_CHECK, OpEvent.MSG_CHECK_FAIL): _OP.TRAJECTORY_CREATION,
    (_OP.AWAIT_CHECK, OpEvent.MSG_MRM_EXECUTED): _OP.EMERGENCY_STOPPED,
    (_OP.TRAJECTORY_APPROVAL, OpEvent.UI_APPROVE): _OP.MONITORING,
    (_OP.TRAJECTORY_APPROVAL, OpEvent.UI_REJECT): _OP.TRAJECTORY_CREATION,
    (_OP.TRAJECTORY_APPROVAL, OpEvent.MSG_MRM_EXECUTED): _OP.EMERGENCY_STOPPED,
    (_OP.MONITORING, OpEvent.MSG_TRACKING_STARTED): _OP.MONITORING,
    (_OP.MONITORING, OpEvent.MSG_PATH_END): _OP.TRAJECTORY_CREATION,
    (_OP.MONITORING, OpEvent.UI_ESTOP): _OP.EMERGENCY_STOPPED,
    (_OP.MONITORING, OpEvent.MSG_MRM_EXECUTED): _OP.EMERGENCY_STOPPED,
    (_OP.EMERGENCY_STOPPED, OpEvent.MSG_MRM_EXECUTED): _OP.EMERGENCY_STOPPED,
    (_OP.EMERGENCY_STOPPED, OpEvent.UI_ACK_MRM): _OP.TRAJECTORY_CREATION,
}

VEHICLE_TRANSITIONS: dict[tuple[VehiclePhase, VehEvent], VehiclePhase] = {
    (_VP.AUTOMATED_OPERATION, VehEvent.DISENGAGE): _VP.AUTOMATED_OPERATION,
    (_VP.AUTOMATED_OPERATION, VehEvent.MSG_TAKEOVER_ACK): _VP.AWAIT_TRAJECTORY,
    (_VP.AWAIT_TRAJECTORY, VehEvent.MSG_PROPOSAL): _VP.TRAJECTORY_CHECK,
    (_VP.AWAIT_TRAJECTORY, VehEvent.MSG_SESSION_END): _VP.HANDOVER,
    (_VP.TRAJECTORY_CHECK, VehEvent.CHECK_PASSED): _VP.AWAIT_APPROVAL,
    (_VP.TRAJECTORY_CHECK, VehEvent.CHECK_FAILED): _VP.AWAIT_TRAJECTORY,
    (_VP.AWAIT_APPROVAL, VehEvent.MSG_APPROVE): _VP.TRAJECTORY_TRACKING,
    (_VP.AWAIT_APPROVAL, VehEvent.MSG_REJECT): _VP.AWAIT_TRAJECTORY,
    (_VP.TRAJECTORY_TRACKING, VehEvent.PATH_END): _VP.AWAIT_TRAJECTORY,
    (_VP.TRAJECTORY_TRACKING, VehEvent.COLLISION_RISK): _VP.EMERGENCY_STOP,
    (_VP.EMERGENCY_STOP, VehEvent.MRM_COMPLETE): _VP.AWAIT_TRAJECTORY,
    (_VP.HANDOVER, VehEvent.HANDOVER_COMPLETE): _VP.AUTOMATED_OPERATION,
}
# an emergency trigger reaches EmergencyStop from any in-session phase
for _ph in (_VP.AWAIT_TRAJECTORY, _VP.TRAJECTORY_CHECK, _VP.AWAIT_APPROVAL,
            _VP.TRAJECTORY_TRACKING):
    VEHICLE_TRANSITIONS[(_ph, VehEvent.MSG_ESTOP)] = _VP.EMERGENCY_STOP
    VEHICLE_TRANSITIONS[(_ph, VehEvent.LINK_LOST)] = _VP.EMERGENCY_STOP
# repeated triggers while already stopping are absorbed
VEHICLE_TRANSITIONS[(_VP.EMERGENCY_STOP, VehEvent.MSG_ESTOP)] = _VP.EMERGENCY_STOP
VEHICLE_TRANSITIONS[(_VP.EMERGENCY_STOP, VehEvent.LINK_LOST)] = _VP.EMERGENCY_STOP


def _emit_takeover_ack(data):
    return [draft(MessageType.TAKEOVER_ACK)]


def _emit_proposal(data):
    return [draft(MessageType.TRAJECTORY_PROPOSAL, data)]


def _emit_approve(data):
    return [draft(MessageType.TRAJECTORY_APPROVE, {"traj_id": (data or {}).get("traj_id")})]


def _emit_reject(data):
    return [draft(MessageType.TRAJECTORY_REJECT, {"traj_id": (data or {}).get("traj_id")})]


def _emit_estop(data):
    return [draft(MessageType.EMERGENCY_STOP)]


def _emit_session_end(data):
    return [draft(MessageType.SESSION_END, {"goal_reached": bool((data or {}).get("goal_reached", True))})]


_OP_EMITS: dict[tuple[OperatorPhase, OpEvent], Callable] = {
    (_OP.IDLE, OpEvent.MSG_TELEOP_REQUEST): _emit_takeover_ack,
    (_OP.TRAJECTORY_CREATION, OpEvent.UI_SUBMIT): _emit_proposal,
    (_OP.TRAJECTORY_CREATION, OpEvent.UI_END_SESSION): _emit_session_end,
    (_OP.TRAJECTORY_APPROVAL, OpEvent.UI_APPROVE): _emit_approve,
    (_OP.TRAJECTORY_APPROVAL, OpEvent.UI_REJECT): _emit_reject,
    (_OP.MONITORING, OpEvent.UI_ESTOP): _emit_estop,
}


def _emit_teleop_request(data):
    return [draft(MessageType.TELEOP_REQUEST, data or {})]


def _emit_checked(status):
    def emit(data):
        d = data or {}
        return [draft(MessageType.TRAJECTORY_CHECKED,
                      {"status": status, "reasons": list(d.get("reasons", [])),
                       "traj_id": d.get("traj_id")})]
    return emit


def _emit_tracking_started(data):
    return [draft(MessageType.TRACKING_STARTED, {"traj_id": (data or {}).get("traj_id")})]


def _emit_path_end(data):
    return [draft(MessageType.PATH_END_REACHED, data or {})]


def _emit_mrm(stage):
    def emit(data):
        return [draft(MessageType.MRM_EXECUTED, {"stage": stage, **(data or {})})]
    return emit


_VEH_EMITS: dict[tuple[VehiclePhase, VehEvent], Callable] = {
    (_VP.AUTOMATED_OPERATION, VehEvent.DISENGAGE): _emit_teleop_request,
    (_VP.TRAJECTORY_CHECK, VehEvent.CHECK_PASSED): _emit_checked("ok"),
    (_VP.TRAJECTORY_CHECK, VehEvent.CHECK_FAILED): _emit_checked("rejected"),
    (_VP.AWAIT_APPROVAL, VehEvent.MSG_APPROVE): _emit_tracking_started,
    (_VP.TRAJECTORY_TRACKING, VehEvent.PATH_END): _emit_path_end,
    (_VP.EMERGENCY_STOP, VehEvent.MRM_COMPLETE): _emit_mrm("completed"),
}
for _ph in (_VP.AWAIT_TRAJECTORY, _VP.TRAJECTORY_CHECK, _VP.AWAIT_APPROVAL,
            _VP.TRAJECTORY_TRACKING):
    _VEH_EMITS[(_ph, VehEvent.MSG_ESTOP)] = _emit_mrm("triggered")
    _VEH_EMITS[(_ph, VehEvent.LINK_LOST)] = _emit_mrm("triggered")


def state_step_operator(phase: OperatorPhase, event: OpEvent, data=None) -> tuple[OperatorPhase, list[Message]]:
    """Advance the operator machine; raises IllegalTransition on bad events."""
    if event in OP_ALWAYS_OK:
        return phase, []
    nxt = OPERATOR_TRANSITIONS.get((phase, event))
    if nxt is None:
        raise IllegalTransition(f"operator: {event.value} not legal in {phase.value}")
    emit = _OP_EMITS.get((phase, event))
    return nxt, (emit(data) if emit else [])


def state_step_vehicle(phase: VehiclePhase, event: VehEvent, data=None) -> tuple[VehiclePhase, list[Message]]:
    """Advance the vehicle machine; raises IllegalTransition on bad events."""
    if event in VEH_ALWAYS_OK:
        return phase, []
    nxt = VEHICLE_TRANSITIONS.get((phase, event))
    if nxt is None:
        raise IllegalTransition(f"vehicle: {event.value} not legal in {phase.value}")
    emit = _VEH_EMITS.get((phase, event))
    return nxt, (emit(data) if emit else [])


# --- heartbeat / link health -------------------------------------------------


@dataclass
class LinkHealth:
    """Liveness bookkeeping for one receive direction."""

    last_heard: float = 0.0
    period: float = 20.0
    threshold: float = 80.0

    def __post_init__(self):
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if not self.period < self.threshold / 2:
            raise ValueError("heartbeat period must be below half the loss threshold")


class HeartbeatMonitor:
    """Declares loss when now - last_heard > threshold; re-arms on arrival."""

    def __init__(self, health: LinkHealth):
        self.health = health
        self.lost = False
        self.loss_count = 0

    def note_arrival(self, now: float) -> None:
        self.health.last_heard = max(self.health.last_heard, now)
        self.lost = False

    def poll(self, now: float) -> bool:
        """True exactly once per loss episode (edge trigger)."""
        if self.lost:
            return False
        if now - self.health.last_heard > self.health.threshold:
            self.lost = True
            self.loss_count += 1
            return True
        return False
