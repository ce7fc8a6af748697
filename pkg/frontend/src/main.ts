import { ALL_COMMANDS, commandAllowed } from "./gate";
import { Store } from "./state";
import { drawScene } from "./render";
import { Viewport } from "./transform";
import { BridgeClient } from "./ws";
import type { UiCommand, UiCommandType } from "./types";

const store = new Store();
const viewport = new Viewport();
const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;
const client = new BridgeClient(wsUrl, store);

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const phaseBadge = document.getElementById("phase") as HTMLElement;
const statusBadge = document.getElementById("status") as HTMLElement;
const speedLabel = document.getElementById("speed") as HTMLElement;
const alarmBar = document.getElementById("alarms") as HTMLElement;
const checkLabel = document.getElementById("check") as HTMLElement;
const mrmModal = document.getElementById("mrm-modal") as HTMLElement;

const buttons: Partial<Record<UiCommandType, HTMLButtonElement>> = {};
for (const cmd of ALL_COMMANDS) {
  const el = document.getElementById(`btn-${cmd}`);
  if (el) buttons[cmd] = el as HTMLButtonElement;
}

/** Send only when the gate allows it in the currently displayed phase. */
export function trySend(cmd: UiCommand): boolean {
  const scene = store.scene;
  if (!scene) return false;
  if (!commandAllowed(scene.phase, cmd.type, scene.goal_reached)) return false;
  return client.send(cmd);
}

function resize(): void {
  const rect = canvas.parentElement!.getBoundingClientRect();
  canvas.width = rect.width;
  canvas.height = rect.height;
  render();
}

function render(): void {
  const scene = store.scene;
  drawScene(canvas, scene, viewport, store.status);

  statusBadge.textContent = store.status;
  statusBadge.className = `badge ${store.status}`;
  if (!scene) return;

  phaseBadge.textContent = scene.phase;
  speedLabel.textContent = `${(scene.vehicle.v * 3.6).toFixed(1)} km/h  ·  s=${scene.vehicle.s_progress.toFixed(1)} m`;

  for (const cmd of ALL_COMMANDS) {
    const btn = buttons[cmd];
    if (btn) btn.disabled = !commandAllowed(scene.phase, cmd, scene.goal_reached);
  }

  const alarms = [...scene.alarms];
  if (store.status !== "connected") alarms.push("ui_link_lost");
  alarmBar.textContent = alarms.length ? alarms.join("  ·  ") : "";
  alarmBar.style.display = alarms.length ? "block" : "none";
  mrmModal.style.display = scene.alarms.includes("mrm") ? "flex" : "none";

  if (scene.check) {
    checkLabel.textContent = scene.check.status === "ok"
      ? `check ok (${scene.check.traj_id})`
      : `check rejected: ${scene.check.reasons.join(", ")}`;
    checkLabel.className = scene.check.status === "ok" ? "ok" : "bad";
  } else {
    checkLabel.textContent = "";
  }
}

canvas.addEventListener("click", (ev) => {
  const scene = store.scene;
  if (!scene) return;
  const rect = canvas.getBoundingClientRect();
  const [x, y] = viewport.screenToWorld(ev.clientX - rect.left, ev.clientY - rect.top);
  trySend({ type: "add_waypoint", x, y });
});

for (const cmd of ALL_COMMANDS) {
  buttons[cmd]?.addEventListener("click", () => trySend({ type: cmd }));
}

// RQ: the emergency stop must be immediately available while monitoring
window.addEventListener("keydown", (ev) => {
  if (ev.code === "Space") {
    ev.preventDefault();
    trySend({ type: "estop" });
  }
});

window.addEventListener("resize", resize);
store.subscribe(render);
client.connect();
resize();
