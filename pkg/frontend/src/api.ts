/** Thin typed client for the read-only bundle API. */

import { GridJson, MetaJson } from "./types.js";

export interface Api {
  meta(): Promise<MetaJson>;
  surface(
    year: number,
    ports: string[],
    h: number,
    signal?: AbortSignal,
  ): Promise<GridJson>;
  layer(year: number, kind: string, signal?: AbortSignal): Promise<unknown>;
}

export class HttpApi implements Api {
  constructor(private readonly base: string = "") {}

  private async get<T>(path: string, signal?: AbortSignal): Promise<T> {
    const resp = await fetch(this.base + path, { signal });
    if (!resp.ok) {
      let detail = `${resp.status}`;
      try {
        const body = await resp.json();
        if (body && body.detail) detail = `${body.detail}`;
      } catch {
        // non-JSON error body; keep the status code
      }
      throw new Error(detail);
    }
    return (await resp.json()) as T;
  }

  meta(): Promise<MetaJson> {
    return this.get("/api/meta");
  }

  surface(
    year: number,
    ports: string[],
    h: number,
    signal?: AbortSignal,
  ): Promise<GridJson> {
    const q = new URLSearchParams({
      year: String(year),
      ports: ports.join(","),
      h: String(h),
    });
    return this.get(`/api/surface?${q}`, signal);
  }

  layer(year: number, kind: string, signal?: AbortSignal): Promise<unknown> {
    const q = new URLSearchParams({ year: String(year), kind });
    return this.get(`/api/layer?${q}`, signal);
  }
}
