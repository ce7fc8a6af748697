"""WebSocket bridge between the operator UI and a live session.

The bridge runs the same deterministic session loop as headless mode but
paced against the wall clock; UI command frames are queued and injected at
tick boundaries, so every command lands exactly once with a monotone
timestamp. Scene frames stream at 20 Hz and carry the full view state,
which makes client reconnects stateless. The real WebSocket sits outside
the simulated channel; vehicle-side safety never depends on the UI link.
"""

from __future__ import annotations

import asyncio
import json
import logging
from pathlib import Path

from .operator import OperatorEndpoint, ScriptedOperatorConfig
from .protocol import MessageType, OpEvent, OperatorPhase
from .scenario import Scenario
from .session import Session, SessionResult, compute_metrics
from .trajectory import build_trajectory
from .vehicle import VehicleParams

log = logging.getLogger(__name__)

UI_COMMANDS = ("add_waypoint", "undo_waypoint", "clear", "submit_proposal",
               "approve", "reject", "estop", "end_session")
SCENE_PERIOD_MS = 50.0  # 20 Hz
AUTO_ACK_MS = 1000.0  # the operator dismisses the emergency alarm


def command_gate(phase: OperatorPhase, cmd: str, goal_reached: bool = False) -> bool:
    """Server-side mirror of the UI command gate: legal phases per command."""
    if cmd in ("add_waypoint", "undo_waypoint", "clear", "submit_proposal"):
        return phase == OperatorPhase.TRAJECTORY_CREATION
    if cmd in ("approve", "reject"):
        return phase == OperatorPhase.TRAJECTORY_APPROVAL
    if cmd == "estop":
        return phase == OperatorPhase.MONITORING
    if cmd == "end_session":
        return phase == OperatorPhase.TRAJECTORY_CREATION and goal_reached
    return False


class UiOperatorEndpoint(OperatorEndpoint):
    """Operator endpoint driven by UI frames instead of scripted timers."""

    def __init__(self, scenario: Scenario, config: ScriptedOperatorConfig | None = None):
        cfg = config or ScriptedOperatorConfig(waypoints=[])
        super().__init__(scenario, cfg)
        self.draft_waypoints: list[tuple[float, float]] = []
        self.preview: dict | None = None
        self.last_check: dict | None = None
        self.command_log: list[tuple[float, str]] = []

    def _on_enter(self, phase: OperatorPhase, now: float) -> None:
        # UI mode schedules no planning/approval scripts, only housekeeping
        if phase == OperatorPhase.TAKEOVER:
            self._schedule(now + self.config.takeover_time_ms, OpEvent.UI_BEGIN_PLANNING)
        elif phase == OperatorPhase.TRAJECTORY_CREATION:
            self._resend.pop("estop", None)
            if self._goal_is_reached():
                self.goal_reached = True
        elif phase == OperatorPhase.EMERGENCY_STOPPED:
            self._resend.pop("approve", None)
            self._schedule(now + AUTO_ACK_MS, OpEvent.UI_ACK_MRM)

    def _refresh_preview(self) -> None:
        if len(self.draft_waypoints) < 2:
            self.preview = None
            return
        try:
            traj = build_trajectory(self.draft_waypoints, self.scenario.limits,
                                    traj_id="preview")
            self.preview = {
                "points": [[float(x), float(y)] for x, y in zip(traj.x, traj.y)],
                "length_m": traj.length,
                "duration_s": traj.duration,
            }
        except Exception as e:
            self.preview = {"error": str(e)}

    def handle_command(self, cmd: dict, now: float) -> dict | None:
        """Apply one UI command; returns an error frame payload or None."""
        kind = cmd.get("type")
        if kind not in UI_COMMANDS:
            return {"type": "error", "reason": "malformed", "detail": f"unknown command {kind!r}"}
        if not command_gate(self.phase, kind, self.goal_reached):
            return {"type": "error", "reason": "illegal_command",
                    "detail": f"{kind} not allowed in {self.phase.value}"}
        self.command_log.append((now, kind))
        if kind == "add_waypoint":
            try:
                x, y = float(cmd["x"]), float(cmd["y"])
            except (KeyError, TypeError, ValueError):
                return {"type": "error", "reason": "malformed", "detail": "add_waypoint needs x,y"}
            if not self.scenario.contains(x, y):
                return {"type": "error", "reason": "out_of_bounds"}
            self.draft_waypoints.append((x, y))
            self._refresh_preview()
        elif kind == "undo_waypoint":
            if self.draft_waypoints:
                self.draft_waypoints.pop()
            self._refresh_preview()
        elif kind == "clear":
            self.draft_waypoints.clear()
            self.preview = None
        elif kind == "submit_proposal":
            if len(self.draft_waypoints) < 2:
                return {"type": "error", "reason": "too_few_waypoints"}
            payload = self._build_proposal(list(self.draft_waypoints), now)
            if payload is None:
                self.aborted = None  # UI mode: recoverable, operator retries
                return {"type": "error", "reason": "build_failed"}
            self._dispatch(OpEvent.UI_SUBMIT, payload, now)
        elif kind == "approve":
            self._dispatch(OpEvent.UI_APPROVE, {"traj_id": self._current_traj_id()}, now)
            # the drafts are now the vehicle's active trajectory
            self.draft_waypoints.clear()
            self.preview = None
        elif kind == "reject":
            self._dispatch(OpEvent.UI_REJECT, {"traj_id": self._current_traj_id()}, now)
            self.draft_waypoints.clear()
            self.preview = None
        elif kind == "estop":
            self._dispatch(OpEvent.UI_ESTOP, None, now)
        elif kind == "end_session":
            self._dispatch(OpEvent.UI_END_SESSION, {"goal_reached": True}, now)
        return None

    def on_message(self, msg, now: float) -> None:
        if msg.type == MessageType.TRAJECTORY_CHECKED:
            self.last_check = dict(msg.payload)
        # a finished or aborted segment starts the next plan from scratch;
        # retransmitted completion notices must not wipe fresh drafts
        if msg.type == MessageType.PATH_END_REACHED:
            if msg.payload.get("traj_id") not in self._seen_path_end:
                self.draft_waypoints.clear()
                self.preview = None
        elif (msg.type == MessageType.MRM_EXECUTED
                and msg.payload.get("stage") == "completed"):
            key = (msg.payload.get("cause"), msg.payload.get("stop_s"))
            if key not in self._seen_mrm_ids:
                self.draft_waypoints.clear()
                self.preview = None
        super().on_message(msg, now)


class UiSession:
    """Session wrapper that feeds UI frames in and scene frames out."""

    def __init__(self, scenario: Scenario, seed: int = 0,
                 params: VehicleParams | None = None, sim_timeout_s: float = 3600.0):
        self.operator = UiOperatorEndpoint(scenario)
        self.session = Session(scenario, seed=seed, params=params,
                               sim_timeout_s=sim_timeout_s, operator=self.operator)
        self.scenario = scenario
        self._inbox: list[str] = []
        self._scene_seq = 0
        self._next_scene = 0.0
        self.errors: list[dict] = []

    @property
    def now(self) -> float:
        return self.session.now

    @property
    def done(self) -> bool:
        return self.session.done

    def enqueue(self, text: str) -> None:
        self._inbox.append(text)

    def _inject(self, text: str) -> dict | None:
        try:
            cmd = json.loads(text)
            if not isinstance(cmd, dict):
                raise ValueError("frame must be an object")
        except (json.JSONDecodeError, ValueError) as e:
            return {"type": "error", "reason": "malformed", "detail": str(e)}
        return self.operator.handle_command(cmd, self.session.now)

    def _drain(self, now: float) -> None:
        for text in self._inbox:
            err = self._inject(text)
            if err is not None:
                self.errors.append(err)
        self._inbox.clear()

    def tick(self) -> dict | None:
        """Advance 10 ms; queued UI frames land inside the tick boundary."""
        self.session.tick(inject=self._drain)
        if self.session.now >= self._next_scene:
            self._next_scene = self.session.now + SCENE_PERIOD_MS
            return self.scene_frame()
        return None

    def scene_frame(self) -> dict:
        veh = self.session.vehicle
        op = self.operator
        self._scene_seq += 1
        tracker = veh.tracker
        active = None
        if tracker is not None:
            traj = tracker.traj
            active = {
                "id": traj.id,
                "points": [[float(x), float(y)] for x, y in zip(traj.x, traj.y)],
                "v": [float(v) for v in traj.v],
                "length_m": traj.length,
            }
        alarms = []
        if op.link_alarm:
            alarms.append("link_lost")
        if op.phase == OperatorPhase.EMERGENCY_STOPPED:
            alarms.append("mrm")
        if op.last_check is not None and op.last_check.get("status") == "rejected":
            alarms.append("check_failed")
        return {
            "type": "scene_state",
            "seq": self._scene_seq,
            "sent_at_ms": self.session.now,
            "payload": {
                "scenario": self.scenario.to_dict(),
                "phase": op.phase.value,
                "vehicle_phase": veh.phase.value,
                "vehicle": {"x": veh.state.x, "y": veh.state.y, "psi": veh.state.psi,
                            "v": veh.state.v, "a": veh.state.a,
                            "s_progress": veh.state.s_progress},
                "draft_waypoints": [[x, y] for x, y in op.draft_waypoints],
                "preview": op.preview,
                "active_trajectory": active,
                "check": op.last_check,
                "alarms": alarms,
                "goal_reached": op.goal_reached,
                "mrm_active": bool(tracker.mrm_active) if tracker else False,
                "sim_time_ms": self.session.now,
            },
        }

    def result(self) -> SessionResult:
        reason = "completed" if self.session.vehicle.session_complete else "aborted"
        res = SessionResult(scenario=self.scenario, seed=self.session.seed,
                            exit_reason=reason, sim_time_s=self.session.now / 1000.0,
                            operator=self.operator, vehicle=self.session.vehicle)
        res.metrics = compute_metrics(res)
        return res


class BindError(OSError):
    pass


_MIME = {".html": "text/html", ".js": "text/javascript", ".css": "text/css",
         ".map": "application/json", ".json": "application/json",
         ".svg": "image/svg+xml", ".ico": "image/x-icon"}


def _static_response(connection, request, static_dir: Path | None):
    """Serve the UI bundle for plain HTTP requests; let /ws upgrade through."""
    if request.path == "/ws":
        return None
    from websockets.http11 import Response
    from websockets.datastructures import Headers
    if static_dir is None:
        return Response(404, "Not Found", Headers(), b"no UI bundle configured\n")
    rel = request.path.lstrip("/") or "index.html"
    target = (static_dir / rel).resolve()
    if not str(target).startswith(str(static_dir.resolve())) or not target.is_file():
        return Response(404, "Not Found", Headers(), b"not found\n")
    body = target.read_bytes()
    headers = Headers()
    headers["Content-Type"] = _MIME.get(target.suffix, "application/octet-stream")
    headers["Content-Length"] = str(len(body))
    return Response(200, "OK", headers, body)


async def serve_ui(scenario: Scenario, bind: str = "127.0.0.1:8765", seed: int = 0,
                   static_dir: str | Path | None = None,
                   realtime: float = 1.0) -> None:
    """Run a UI-driven session on a WebSocket endpoint at /ws.

    ``realtime`` scales pacing (2.0 = twice real time). The session keeps
    running across client reconnects; a disconnect only raises the
    operator-side link alarm.
    """
    try:
        from websockets.asyncio.server import serve
    except ImportError as e:  # pragma: no cover
        raise RuntimeError("the websockets package is required for serve") from e

    host, _, port_s = bind.partition(":")
    port = int(port_s or 8765)
    core = UiSession(scenario, seed=seed)
    clients: set = set()
    static = Path(static_dir) if static_dir else None

    async def handler(conn):
        if conn.request.path != "/ws":
            await conn.close(code=1008, reason="connect to /ws")
            return
        clients.add(conn)
        try:
            await conn.send(json.dumps(core.scene_frame()))
            async for text in conn:
                if isinstance(text, bytes):
                    text = text.decode("utf-8", errors="replace")
                core.enqueue(text)
        except Exception:
            pass
        finally:
            clients.discard(conn)

    async def broadcast(frame: dict):
        if not clients:
            return
        data = json.dumps(frame)
        for conn in list(clients):
            try:
                await conn.send(data)
            except Exception:
                clients.discard(conn)

    try:
        server = await serve(handler, host, port,
                             process_request=lambda c, r: _static_response(c, r, static))
    except OSError as e:
        raise BindError(f"cannot bind {bind}: {e}") from e

    log.info("serving UI bridge on ws://%s:%d/ws", host, port)
    tick_s = 0.01 / max(realtime, 1e-3)
    loop = asyncio.get_running_loop()
    next_wall = loop.time()
    async with server:
        while not core.done:
            frame = core.tick()
            for err in core.errors:
                await broadcast(err)
            core.errors.clear()
            if frame is not None:
                await broadcast(frame)
            next_wall += tick_s
            delay = next_wall - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            else:
                next_wall = loop.time()
        await broadcast(core.scene_frame())
        metrics = core.result().metrics
        log.info("session finished: %s", metrics)
