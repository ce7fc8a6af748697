import type { Viewport } from "./transform";
import type { LinkStatus } from "./state";
import type { ScenePayload } from "./types";

const VEHICLE_LENGTH = 4.5;
const VEHICLE_WIDTH = 2.2;

function polyPath(ctx: CanvasRenderingContext2D, vp: Viewport, pts: number[][], close = false) {
  ctx.beginPath();
  pts.forEach(([x, y], i) => {
    const [px, py] = vp.worldToScreen(x, y);
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  if (close) ctx.closePath();
}

function hatchPolygon(ctx: CanvasRenderingContext2D, vp: Viewport, poly: number[][]) {
  polyPath(ctx, vp, poly, true);
  ctx.save();
  ctx.clip();
  const xs = poly.map((p) => vp.worldToScreen(p[0], p[1])[0]);
  const ys = poly.map((p) => vp.worldToScreen(p[0], p[1])[1]);
  const minX = Math.min(...xs) - 40;
  const maxX = Math.max(...xs) + 40;
  const minY = Math.min(...ys);
  const maxY = Math.max(...ys);
  ctx.strokeStyle = "#d9822b";
  ctx.lineWidth = 2;
  for (let x = minX; x < maxX; x += 12) {
    ctx.beginPath();
    ctx.moveTo(x, maxY);
    ctx.lineTo(x + (maxY - minY), minY);
    ctx.stroke();
  }
  ctx.restore();
  polyPath(ctx, vp, poly, true);
  ctx.strokeStyle = "#e8933b";
  ctx.lineWidth = 2;
  ctx.stroke();
}

function drawVehicle(ctx: CanvasRenderingContext2D, vp: Viewport, scene: ScenePayload) {
  const { x, y, psi } = scene.vehicle;
  const [px, py] = vp.worldToScreen(x, y);
  ctx.save();
  ctx.translate(px, py);
  ctx.rotate(-psi); // screen y is flipped
  const L = VEHICLE_LENGTH * vp.scale;
  const W = VEHICLE_WIDTH * vp.scale;
  ctx.fillStyle = scene.mrm_active ? "#c0392b" : "#2e86de";
  ctx.strokeStyle = "#eaf2ff";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.rect(-L / 2, -W / 2, L, W);
  ctx.fill();
  ctx.stroke();
  // heading wedge
  ctx.beginPath();
  ctx.moveTo(L / 2, 0);
  ctx.lineTo(L / 4, -W / 4);
  ctx.lineTo(L / 4, W / 4);
  ctx.closePath();
  ctx.fillStyle = "#eaf2ff";
  ctx.fill();
  ctx.restore();
}

function nearestIndex(points: number[][], x: number, y: number): number {
  let best = 0;
  let bestD = Infinity;
  for (let i = 0; i < points.length; i++) {
    const dx = points[i][0] - x;
    const dy = points[i][1] - y;
    const d = dx * dx + dy * dy;
    if (d < bestD) {
      bestD = d;
      best = i;
    }
  }
  return best;
}

export function drawScene(
  canvas: HTMLCanvasElement,
  scene: ScenePayload | null,
  vp: Viewport,
  status: LinkStatus,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#10151c";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  if (!scene) {
    ctx.fillStyle = "#8a98a8";
    ctx.font = "16px system-ui, sans-serif";
    ctx.fillText("waiting for scene_state...", 24, 36);
    return;
  }
  vp.fit(scene.scenario.bounds, canvas.width, canvas.height);

  // drivable area
  polyPath(ctx, vp, scene.scenario.bounds, true);
  ctx.fillStyle = "#1c2733";
  ctx.fill();
  ctx.strokeStyle = "#33475c";
  ctx.lineWidth = 2;
  ctx.stroke();

  for (const ob of scene.scenario.obstacles) hatchPolygon(ctx, vp, ob);

  // goal ring and start marker
  const g = scene.scenario.goal;
  const [gx, gy] = vp.worldToScreen(g.x, g.y);
  ctx.beginPath();
  ctx.arc(gx, gy, g.radius * vp.scale, 0, Math.PI * 2);
  ctx.strokeStyle = scene.goal_reached ? "#2ecc71" : "#8fd3a7";
  ctx.setLineDash([6, 4]);
  ctx.lineWidth = 2;
  ctx.stroke();
  ctx.setLineDash([]);
  const [sx, sy] = vp.worldToScreen(scene.scenario.start_pose[0], scene.scenario.start_pose[1]);
  ctx.fillStyle = "#8a98a8";
  ctx.fillRect(sx - 4, sy - 4, 8, 8);

  // active trajectory in blue, remaining tail red while an MRM runs
  const active = scene.active_trajectory;
  if (active && active.points.length > 1) {
    const split = scene.mrm_active
      ? nearestIndex(active.points, scene.vehicle.x, scene.vehicle.y)
      : active.points.length;
    polyPath(ctx, vp, active.points.slice(0, split + 1));
    ctx.strokeStyle = "#2e86de";
    ctx.lineWidth = 3;
    ctx.stroke();
    if (split < active.points.length - 1) {
      polyPath(ctx, vp, active.points.slice(split));
      ctx.strokeStyle = "#e74c3c";
      ctx.lineWidth = 3;
      ctx.stroke();
    }
  }

  // spline preview from the server echo, recolored by check status
  if (scene.preview && scene.preview.points && scene.preview.points.length > 1) {
    polyPath(ctx, vp, scene.preview.points);
    const checkOk = scene.check && scene.check.status === "ok"
      && scene.phase === "TrajectoryApproval";
    ctx.strokeStyle = checkOk ? "#2ecc71" : "#f1c40f";
    ctx.setLineDash([8, 6]);
    ctx.lineWidth = 2;
    ctx.stroke();
    ctx.setLineDash([]);
  }

  // clicked waypoints as yellow circles
  for (const [x, y] of scene.draft_waypoints) {
    const [px, py] = vp.worldToScreen(x, y);
    ctx.beginPath();
    ctx.arc(px, py, 6, 0, Math.PI * 2);
    ctx.fillStyle = "#f5d90a";
    ctx.fill();
    ctx.strokeStyle = "#3a3a1e";
    ctx.lineWidth = 1.5;
    ctx.stroke();
  }

  drawVehicle(ctx, vp, scene);

  // greyed veil when the UI link is down (session continues vehicle-side)
  if (status !== "connected") {
    ctx.fillStyle = "rgba(16, 21, 28, 0.72)";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
  }
}
