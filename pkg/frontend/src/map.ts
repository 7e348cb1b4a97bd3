/** Harbor map rendering: north-up world view on a 2D canvas.
 *
 * The drawing functions depend only on a small context interface so tests
 * can record the calls without a real canvas.
 */

import type { Frame } from "./protocol.js";

export interface ScenarioGeometry {
  dock: number[][];
  berth: number[][];
  hull: number[][];
  berth_point: { x: number; y: number; psi: number };
}

export interface ThrusterInfo {
  lx: number;
  ly: number;
  fmin: number;
  fmax: number;
  fixed_angle: number | null;
}

/** The subset of CanvasRenderingContext2D the map needs. */
export interface Draw2D {
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  stroke(): void;
  fill(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  strokeStyle: string | unknown;
  fillStyle: string | unknown;
  lineWidth: number;
  font: string;
}

export interface Viewport {
  scale: number; // pixels per meter
  offsetX: number;
  offsetY: number;
  width: number;
  height: number;
}

/** North-up projection: screen x = east, screen y = -north. */
export function fitViewport(
  geometry: ScenarioGeometry,
  width: number,
  height: number,
  padding = 30,
): Viewport {
  const east = geometry.dock.map((p) => p[1]);
  const north = geometry.dock.map((p) => p[0]);
  const eMin = Math.min(...east);
  const eMax = Math.max(...east);
  const nMin = Math.min(...north);
  const nMax = Math.max(...north);
  const scale = Math.min(
    (width - 2 * padding) / Math.max(eMax - eMin, 1),
    (height - 2 * padding) / Math.max(nMax - nMin, 1),
  );
  return {
    scale,
    offsetX: padding - eMin * scale,
    offsetY: padding + nMax * scale,
    width,
    height,
  };
}

export function toScreen(view: Viewport, north: number, east: number): [number, number] {
  return [view.offsetX + east * view.scale, view.offsetY - north * view.scale];
}

function tracePolygon(ctx: Draw2D, view: Viewport, points: number[][]): void {
  ctx.beginPath();
  points.forEach(([n, e], i) => {
    const [sx, sy] = toScreen(view, n, e);
    if (i === 0) ctx.moveTo(sx, sy);
    else ctx.lineTo(sx, sy);
  });
  ctx.closePath();
}

export function drawHarbor(ctx: Draw2D, view: Viewport, geometry: ScenarioGeometry): void {
  ctx.clearRect(0, 0, view.width, view.height);
  ctx.lineWidth = 2;
  ctx.strokeStyle = "#23495f";
  ctx.fillStyle = "#0e2733";
  tracePolygon(ctx, view, geometry.dock);
  ctx.fill();
  ctx.stroke();
  ctx.lineWidth = 1.5;
  ctx.strokeStyle = "#3fa66a";
  tracePolygon(ctx, view, geometry.berth);
  ctx.stroke();
  const [bx, by] = toScreen(view, geometry.berth_point.x, geometry.berth_point.y);
  ctx.beginPath();
  ctx.arc(bx, by, 4, 0, 2 * Math.PI);
  ctx.fillStyle = "#3fa66a";
  ctx.fill();
}

function bodyToWorld(
  pose: { x: number; y: number; psi: number },
  bx: number,
  by: number,
): [number, number] {
  const c = Math.cos(pose.psi);
  const s = Math.sin(pose.psi);
  return [pose.x + c * bx - s * by, pose.y + s * bx + c * by];
}

export function drawVessel(
  ctx: Draw2D,
  view: Viewport,
  geometry: ScenarioGeometry,
  frame: Frame,
  thrusters: ThrusterInfo[],
): void {
  const hullWorld = geometry.hull.map(([bx, by]) => bodyToWorld(frame.pose, bx, by));
  ctx.lineWidth = 1.5;
  ctx.strokeStyle = frame.mode === "human" ? "#e0a030" : "#7fc4e8";
  ctx.fillStyle = frame.mode === "human" ? "#5a3f15" : "#1c4056";
  tracePolygon(ctx, view, hullWorld);
  ctx.fill();
  ctx.stroke();
  drawThrusterArrows(ctx, view, frame, thrusters);
  drawForceGlyph(ctx, view, frame);
}

/** One arrow per thruster, scaled by force, rotated by its angle. */
export function drawThrusterArrows(
  ctx: Draw2D,
  view: Viewport,
  frame: Frame,
  thrusters: ThrusterInfo[],
): void {
  const forces = [frame.action.f1, frame.action.f2, frame.action.f3];
  const angles = [
    frame.action.alpha1,
    frame.action.alpha2,
    thrusters[2]?.fixed_angle ?? Math.PI / 2,
  ];
  ctx.strokeStyle = "#f2c14e";
  ctx.lineWidth = 2;
  thrusters.forEach((thr, i) => {
    const f = forces[i];
    if (f === 0) return; // zero force: no arrow at all
    const span = Math.max(Math.abs(thr.fmax), Math.abs(thr.fmin));
    const lengthM = (25 * f) / span; // signed, up to 25 m on screen scale
    const a = angles[i];
    const tip = [
      thr.lx + Math.cos(a) * lengthM,
      thr.ly + Math.sin(a) * lengthM,
    ];
    const [x0, y0] = toScreen(view, ...bodyToWorld(frame.pose, thr.lx, thr.ly));
    const [x1, y1] = toScreen(view, ...bodyToWorld(frame.pose, tip[0], tip[1]));
    ctx.beginPath();
    ctx.moveTo(x0, y0);
    ctx.lineTo(x1, y1);
    ctx.stroke();
    ctx.beginPath();
    ctx.arc(x1, y1, 2.5, 0, 2 * Math.PI);
    ctx.stroke();
  });
}

/** Net force vector plus a moment arc at the vessel origin. */
export function drawForceGlyph(ctx: Draw2D, view: Viewport, frame: Frame): void {
  const { fx, fy, torque } = frame.forces;
  const [x0, y0] = toScreen(view, frame.pose.x, frame.pose.y);
  const magnitude = Math.hypot(fx, fy);
  ctx.strokeStyle = "#ef6461";
  ctx.lineWidth = 2.5;
  if (magnitude > 1e-6) {
    const lengthM = Math.min(magnitude / 8, 40);
    const tip = bodyToWorld(frame.pose, (fx / magnitude) * lengthM, (fy / magnitude) * lengthM);
    const [x1, y1] = toScreen(view, tip[0], tip[1]);
    ctx.beginPath();
    ctx.moveTo(x0, y0);
    ctx.lineTo(x1, y1);
    ctx.stroke();
  }
  if (Math.abs(torque) > 1e-6) {
    const sweep = Math.min(Math.abs(torque) / 2000, 1.2);
    ctx.beginPath();
    if (torque > 0) ctx.arc(x0, y0, 14, -Math.PI / 2, -Math.PI / 2 + sweep);
    else ctx.arc(x0, y0, 14, -Math.PI / 2 - sweep, -Math.PI / 2);
    ctx.stroke();
  }
}
