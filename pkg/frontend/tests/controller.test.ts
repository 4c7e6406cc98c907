import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { Api } from "../src/api.js";
import { ExplorerController } from "../src/controller.js";
import { rasterizeGrid } from "../src/colormap.js";
import { defaultState } from "../src/state.js";
import { GridJson, MetaJson } from "../src/types.js";

const YEARS = [1824, 1825, 1826];
const PORTS: Record<string, string[]> = {
  "1824": ["Lagos", "Ouidah", "Porto Novo"],
  "1825": ["Lagos", "Ouidah", "Porto Novo"],
  "1826": ["Lagos", "Ouidah", "Porto Novo"],
};

function grid(tag: number): GridJson {
  return {
    x_min: 0, x_max: 4, y_min: 0, y_max: 3, nx: 4, ny: 3,
    kind: "kde",
    values: Array.from({ length: 12 }, (_, i) => i + tag * 100),
  };
}

/** Mock API: the all-port selection returns the unconditional surface. */
class MockApi implements Api {
  calls: { year: number; ports: string[]; h: number }[] = [];
  unconditional = grid(7);
  delayMs = 0;
  private tag = 0;

  meta(): Promise<MetaJson> {
    return Promise.resolve({
      years: YEARS,
      ports: PORTS,
      bandwidth_km: { min: 0.5, max: 2.0 },
      frame: {
        origin_lon: 3, origin_lat: 8,
        km_per_deg_lon: 110, km_per_deg_lat: 110.574,
      },
      units: {},
    });
  }

  surface(year: number, ports: string[], h: number): Promise<GridJson> {
    this.calls.push({ year, ports: [...ports], h });
    const all = [...PORTS[String(year)]].sort();
    const body =
      JSON.stringify(ports) === JSON.stringify(all)
        ? this.unconditional
        : grid(++this.tag);
    if (this.delayMs === 0) return Promise.resolve(body);
    return new Promise((resolve) =>
      setTimeout(() => resolve(body), this.delayMs),
    );
  }

  layer(): Promise<unknown> {
    return Promise.resolve([]);
  }
}

function make(api: MockApi, events = {}) {
  return new ExplorerController(api, YEARS, PORTS, events, {
    debounceMs: 150,
    initial: defaultState(1825, PORTS["1825"]),
  });
}

beforeEach(() => {
  vi.useFakeTimers();
});

afterEach(() => {
  vi.useRealTimers();
});

async function settle(ms = 200): Promise<void> {
  await vi.advanceTimersByTimeAsync(ms);
}

describe("debounced surface requests", () => {
  it("issues exactly one request per settled selection", async () => {
    const api = new MockApi();
    const controller = make(api);
    controller.setBandwidth(1.5);
    await settle();
    expect(api.calls.length).toBe(1);
    expect(api.calls[0].h).toBe(1.5);
  });

  it("a year slider sweep with pauses issues one request per year", async () => {
    const api = new MockApi();
    const controller = make(api);
    for (const year of [1824, 1825, 1826]) {
      controller.setYear(year);
      await settle();
    }
    expect(api.calls.map((c) => c.year)).toEqual([1824, 1825, 1826]);
  });

  it("rapid scrubbing coalesces into one request for the final state", async () => {
    const api = new MockApi();
    const controller = make(api);
    controller.setYear(1824);
    await settle(50); // under the debounce window
    controller.setYear(1825);
    await settle(50);
    controller.setYear(1826);
    await settle(500);
    expect(api.calls.length).toBe(1);
    expect(api.calls[0].year).toBe(1826);
  });

  it("layer toggles never refetch the surface", async () => {
    const api = new MockApi();
    const controller = make(api);
    controller.setBandwidth(1.0);
    await settle();
    const before = api.calls.length;
    controller.setLayer("network", true);
    controller.setLayer("borders", true);
    await settle();
    expect(api.calls.length).toBe(before);
  });
});

describe("client-side precondition checks", () => {
  it("rejects h outside [0.5, 2] without issuing a request", async () => {
    const api = new MockApi();
    const errors: string[] = [];
    const controller = make(api, { onError: (m: string) => errors.push(m) });
    controller.setBandwidth(3.0);
    controller.setBandwidth(0.2);
    await settle();
    expect(api.calls.length).toBe(0);
    expect(errors.length).toBe(2);
    expect(errors[0]).toMatch(/0.5, 2/);
  });

  it("rejects unavailable years without issuing a request", async () => {
    const api = new MockApi();
    const errors: string[] = [];
    const controller = make(api, { onError: (m: string) => errors.push(m) });
    controller.setYear(1900);
    await settle();
    expect(api.calls.length).toBe(0);
    expect(errors).toHaveLength(1);
  });

  it("deselecting the last port prompts instead of requesting", async () => {
    const api = new MockApi();
    const prompts: string[] = [];
    const controller = make(api, { onPrompt: (m: string) => prompts.push(m) });
    controller.setPorts([]);
    await settle();
    expect(api.calls.length).toBe(0);
    expect(prompts).toHaveLength(1);
  });
});

describe("stale responses", () => {
  it("discards superseded responses under rapid scrubbing", async () => {
    const api = new MockApi();
    api.delayMs = 300; // responses arrive after newer requests are issued
    const rendered: number[] = [];
    const controller = make(api, {
      onSurface: (g: GridJson) => rendered.push(g.values[0]),
    });
    controller.setBandwidth(0.6);
    await settle(160); // request 1 in flight
    controller.setBandwidth(1.9);
    await settle(160); // request 2 in flight
    await settle(2000); // let everything land
    expect(api.calls.length).toBe(2);
    expect(rendered.length).toBe(1); // only the final selection rendered
    const last = api.calls[api.calls.length - 1];
    expect(last.h).toBe(1.9);
  });
});

describe("all-ports selection", () => {
  it("renders identically to the unconditional surface grid", async () => {
    const api = new MockApi();
    let shown: GridJson | undefined;
    const controller = make(api, {
      onSurface: (g: GridJson) => {
        shown = g;
      },
    });
    controller.setPorts(PORTS["1825"]);
    await settle();
    expect(shown).toBeDefined();
    expect(shown).toEqual(api.unconditional);
    const got = rasterizeGrid(shown!.values, shown!.nx, shown!.ny);
    const want = rasterizeGrid(
      api.unconditional.values,
      api.unconditional.nx,
      api.unconditional.ny,
    );
    expect(Array.from(got)).toEqual(Array.from(want));
  });
});
