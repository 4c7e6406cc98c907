/** View state: what the user is looking at, encodable in the URL hash. */

import { LAYERS, LayerName } from "./types.js";

export const H_MIN = 0.5;
export const H_MAX = 2.0;

export interface Viewport {
  x: number; // km at canvas center
  y: number;
  zoom: number; // canvas pixels per km
}

export interface ViewState {
  year: number;
  ports: string[]; // sorted, unique
  h: number;
  layers: Record<LayerName, boolean>;
  viewport: Viewport;
}

export const DEFAULT_LAYERS: Record<LayerName, boolean> = {
  conflicts: false,
  heatmap: true,
  contours: false,
  network: false,
  borders: false,
};

export function defaultState(year: number, ports: string[]): ViewState {
  return {
    year,
    ports: normalizePorts(ports),
    h: 1.0,
    layers: { ...DEFAULT_LAYERS },
    viewport: { x: 0, y: 0, zoom: 1 },
  };
}

export function normalizePorts(ports: string[]): string[] {
  return Array.from(new Set(ports)).sort();
}

export function isValidBandwidth(h: number): boolean {
  return Number.isFinite(h) && h >= H_MIN && h <= H_MAX;
}

/** Round-trippable hash codec: encode(decode(encode(s))) === encode(s). */
export function encodeState(state: ViewState): string {
  const layers = LAYERS.filter((name) => state.layers[name]).join(",");
  const v = state.viewport;
  const parts = [
    `year=${state.year}`,
    `ports=${state.ports.map(encodeURIComponent).join(",")}`,
    `h=${state.h}`,
    `layers=${layers}`,
    `view=${round3(v.x)},${round3(v.y)},${round3(v.zoom)}`,
  ];
  return "#" + parts.join("&");
}

function round3(x: number): number {
  return Math.round(x * 1000) / 1000;
}

export function decodeState(hash: string): ViewState | null {
  const text = hash.startsWith("#") ? hash.slice(1) : hash;
  if (!text) return null;
  const fields = new Map<string, string>();
  for (const part of text.split("&")) {
    const eq = part.indexOf("=");
    if (eq < 0) return null;
    fields.set(part.slice(0, eq), part.slice(eq + 1));
  }
  const year = Number(fields.get("year"));
  const h = Number(fields.get("h"));
  if (!Number.isInteger(year) || !isValidBandwidth(h)) return null;
  const portsRaw = fields.get("ports");
  if (portsRaw === undefined) return null;
  const ports = normalizePorts(
    portsRaw === "" ? [] : portsRaw.split(",").map(decodeURIComponent),
  );
  const layers = { ...DEFAULT_LAYERS };
  for (const name of LAYERS) layers[name] = false;
  const layersRaw = fields.get("layers") ?? "";
  for (const name of layersRaw ? layersRaw.split(",") : []) {
    if (!(LAYERS as readonly string[]).includes(name)) return null;
    layers[name as LayerName] = true;
  }
  const viewRaw = (fields.get("view") ?? "0,0,1").split(",").map(Number);
  if (viewRaw.length !== 3 || viewRaw.some((x) => !Number.isFinite(x))) {
    return null;
  }
  return {
    year,
    ports,
    h,
    layers,
    viewport: { x: viewRaw[0], y: viewRaw[1], zoom: viewRaw[2] },
  };
}

/** Clamp a decoded or mutated state against the served metadata. */
export function validateAgainstMeta(
  state: ViewState,
  years: number[],
  portsOfYear: string[],
): string | null {
  if (!years.includes(state.year)) return `year ${state.year} not available`;
  if (!isValidBandwidth(state.h)) {
    return `bandwidth ${state.h} outside [${H_MIN}, ${H_MAX}] km`;
  }
  for (const p of state.ports) {
    if (!portsOfYear.includes(p)) return `unknown port ${p}`;
  }
  return null;
}
