/** JSON shapes served by the `/api` endpoints. */

export interface GridJson {
  x_min: number;
  x_max: number;
  y_min: number;
  y_max: number;
  nx: number;
  ny: number;
  kind: "intensity" | "pdf" | "kde";
  values: number[]; // row-major, index iy * nx + ix
}

export interface FrameJson {
  origin_lon: number;
  origin_lat: number;
  km_per_deg_lon: number;
  km_per_deg_lat: number;
}

export interface MetaJson {
  years: number[];
  ports: Record<string, string[]>;
  bandwidth_km: { min: number; max: number };
  frame: FrameJson;
  units: Record<string, string>;
}

export interface ConflictJson {
  id: string;
  lon: number;
  lat: number;
  start_year: number;
  end_year: number;
  intensity: number;
}

export interface NetworkJson {
  year: number;
  nodes: { name: string; lon: number; lat: number; role: string }[];
  edges: { from: string; to: string; distance_km: number; cost: number }[];
}

export interface PolicyJson {
  year: number;
  states: string[];
  policy: { state: string; action_target: string }[];
  values: number[];
}

export interface ContourJson {
  level: number;
  lines: number[][][]; // polylines of [x_km, y_km]
}

export interface RegionJson {
  region: string;
  year_from: number;
  year_to: number;
  ring: number[][];
}

export const LAYERS = [
  "conflicts",
  "heatmap",
  "contours",
  "network",
  "borders",
] as const;

export type LayerName = (typeof LAYERS)[number];

/** Painting order: conflicts under the heatmap, borders on top. */
export const LAYER_Z_ORDER: readonly LayerName[] = LAYERS;
