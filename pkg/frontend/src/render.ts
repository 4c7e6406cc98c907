/** Canvas rendering: raster heatmap plus vector overlays in km space. */

import { rasterizeGrid, viridis } from "./colormap.js";
import {
  ConflictJson,
  ContourJson,
  FrameJson,
  GridJson,
  NetworkJson,
  PolicyJson,
  RegionJson,
} from "./types.js";
import { ViewState } from "./state.js";

export interface Layers {
  surface?: GridJson;
  conflicts?: ConflictJson[];
  contours?: ContourJson[];
  network?: NetworkJson;
  policy?: PolicyJson;
  borders?: RegionJson[];
}

export function project(frame: FrameJson, lon: number, lat: number): [number, number] {
  return [
    (lon - frame.origin_lon) * frame.km_per_deg_lon,
    (lat - frame.origin_lat) * frame.km_per_deg_lat,
  ];
}

class Transform {
  constructor(
    private readonly width: number,
    private readonly height: number,
    private readonly view: ViewState["viewport"],
  ) {}

  toPx(x: number, y: number): [number, number] {
    return [
      this.width / 2 + (x - this.view.x) * this.view.zoom,
      this.height / 2 - (y - this.view.y) * this.view.zoom,
    ];
  }
}

export function renderView(
  canvas: HTMLCanvasElement,
  state: ViewState,
  layers: Layers,
  frame: FrameJson,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const t = new Transform(canvas.width, canvas.height, state.viewport);
  ctx.fillStyle = "#10141c";
  ctx.fillRect(0, 0, canvas.width, canvas.height);

  // z-order: conflicts < heatmap < contours < network < borders
  if (state.layers.conflicts && layers.conflicts) {
    drawConflicts(ctx, t, layers.conflicts, frame);
  }
  if (state.layers.heatmap && layers.surface) {
    drawSurface(ctx, t, layers.surface);
  }
  if (state.layers.contours && layers.contours) {
    drawContours(ctx, t, layers.contours);
  }
  if (state.layers.network && layers.network) {
    drawNetwork(ctx, t, layers.network, layers.policy, frame);
  }
  if (state.layers.borders && layers.borders) {
    drawBorders(ctx, t, layers.borders, frame);
  }
}

function drawSurface(
  ctx: CanvasRenderingContext2D,
  t: Transform,
  grid: GridJson,
): void {
  const rgba = rasterizeGrid(grid.values, grid.nx, grid.ny);
  const image = new ImageData(new Uint8ClampedArray(rgba), grid.nx, grid.ny);
  const off = document.createElement("canvas");
  off.width = grid.nx;
  off.height = grid.ny;
  off.getContext("2d")!.putImageData(image, 0, 0);
  const [x0, y1] = t.toPx(grid.x_min, grid.y_min);
  const [x1, y0] = t.toPx(grid.x_max, grid.y_max);
  ctx.imageSmoothingEnabled = true;
  ctx.drawImage(off, x0, y0, x1 - x0, y1 - y0);
}

function drawConflicts(
  ctx: CanvasRenderingContext2D,
  t: Transform,
  conflicts: ConflictJson[],
  frame: FrameJson,
): void {
  for (const c of conflicts) {
    const [x, y] = t.toPx(...project(frame, c.lon, c.lat));
    ctx.beginPath();
    ctx.arc(x, y, c.intensity === 10 ? 5 : 3.5, 0, 2 * Math.PI);
    ctx.fillStyle = c.intensity === 10 ? "#ff5c4d" : "#ffb347";
    ctx.globalAlpha = 0.9;
    ctx.fill();
    ctx.globalAlpha = 1;
  }
}

function drawContours(
  ctx: CanvasRenderingContext2D,
  t: Transform,
  contours: ContourJson[],
): void {
  const levels = contours.map((c) => c.level);
  const lo = Math.min(...levels);
  const hi = Math.max(...levels);
  for (const contour of contours) {
    const frac = hi > lo ? (contour.level - lo) / (hi - lo) : 0.5;
    const [r, g, b] = viridis(frac);
    ctx.strokeStyle = `rgba(${r},${g},${b},0.9)`;
    ctx.lineWidth = 1;
    for (const line of contour.lines) {
      ctx.beginPath();
      line.forEach(([x, y], i) => {
        const [px, py] = t.toPx(x, y);
        if (i === 0) ctx.moveTo(px, py);
        else ctx.lineTo(px, py);
      });
      ctx.stroke();
    }
  }
}

function drawNetwork(
  ctx: CanvasRenderingContext2D,
  t: Transform,
  network: NetworkJson,
  policy: PolicyJson | undefined,
  frame: FrameJson,
): void {
  const position = new Map<string, [number, number]>();
  for (const node of network.nodes) {
    position.set(node.name, project(frame, node.lon, node.lat));
  }
  ctx.strokeStyle = "rgba(190,200,215,0.45)";
  ctx.lineWidth = 1;
  for (const edge of network.edges) {
    const a = position.get(edge.from);
    const b = position.get(edge.to);
    if (!a || !b) continue;
    ctx.beginPath();
    ctx.moveTo(...t.toPx(...a));
    ctx.lineTo(...t.toPx(...b));
    ctx.stroke();
  }
  if (policy) {
    ctx.strokeStyle = "rgba(122,196,255,0.95)";
    ctx.fillStyle = "rgba(122,196,255,0.95)";
    ctx.lineWidth = 1.6;
    for (const step of policy.policy) {
      const from = position.get(step.state);
      const to = position.get(step.action_target.replace(/^sale:/, ""));
      if (!from || !to) continue;
      drawArrow(ctx, t.toPx(...from), t.toPx(...to));
    }
  }
  for (const node of network.nodes) {
    const [px, py] = t.toPx(...position.get(node.name)!);
    ctx.beginPath();
    ctx.arc(px, py, node.role === "interior" ? 2.5 : 4.5, 0, 2 * Math.PI);
    ctx.fillStyle = node.role === "interior" ? "#cdd6e4" : "#ffd75e";
    ctx.fill();
  }
}

function drawArrow(
  ctx: CanvasRenderingContext2D,
  [x0, y0]: [number, number],
  [x1, y1]: [number, number],
): void {
  const mx = x0 + 0.62 * (x1 - x0);
  const my = y0 + 0.62 * (y1 - y0);
  const angle = Math.atan2(y1 - y0, x1 - x0);
  ctx.beginPath();
  ctx.moveTo(x0, y0);
  ctx.lineTo(mx, my);
  ctx.stroke();
  ctx.beginPath();
  ctx.moveTo(mx, my);
  ctx.lineTo(mx - 6 * Math.cos(angle - 0.45), my - 6 * Math.sin(angle - 0.45));
  ctx.lineTo(mx - 6 * Math.cos(angle + 0.45), my - 6 * Math.sin(angle + 0.45));
  ctx.closePath();
  ctx.fill();
}

function drawBorders(
  ctx: CanvasRenderingContext2D,
  t: Transform,
  regions: RegionJson[],
  frame: FrameJson,
): void {
  ctx.strokeStyle = "rgba(255,255,255,0.7)";
  ctx.setLineDash([6, 4]);
  ctx.lineWidth = 1.2;
  for (const region of regions) {
    ctx.beginPath();
    region.ring.forEach(([lon, lat], i) => {
      const [px, py] = t.toPx(...project(frame, lon, lat));
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

/** Legend gradient + labels for the current surface. */
export function renderLegend(
  canvas: HTMLCanvasElement,
  grid: GridJson | undefined,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!grid) return;
  const w = canvas.width - 70;
  for (let i = 0; i < w; i++) {
    const [r, g, b] = viridis(i / (w - 1));
    ctx.fillStyle = `rgb(${r},${g},${b})`;
    ctx.fillRect(i, 4, 1, 12);
  }
  const hi = Math.max(...grid.values);
  ctx.fillStyle = "#cdd6e4";
  ctx.font = "10px sans-serif";
  ctx.fillText("0", 0, 28);
  ctx.fillText(`${hi.toExponential(2)} /km²`, w - 58, 28);
}
