/** Interaction loop: view-state mutations in, at most one debounced
 * surface request per settled selection out.
 *
 * Every response carries the sequence number of the request that produced
 * it; anything older than the latest issued request is discarded, so rapid
 * scrubbing can never render out of order. Requests that would violate the
 * server's preconditions (bad bandwidth, empty or unknown ports, unknown
 * year) are rejected client-side and never issued.
 */

import { Api } from "./api.js";
import { GridJson } from "./types.js";
import {
  ViewState,
  defaultState,
  isValidBandwidth,
  normalizePorts,
  validateAgainstMeta,
} from "./state.js";

export interface ControllerEvents {
  onSurface?: (grid: GridJson, state: ViewState) => void;
  onError?: (message: string) => void;
  onPrompt?: (message: string) => void;
  onState?: (state: ViewState) => void;
}

interface Timers {
  set(fn: () => void, ms: number): unknown;
  clear(handle: unknown): void;
}

const REAL_TIMERS: Timers = {
  set: (fn, ms) => setTimeout(fn, ms),
  clear: (handle) => clearTimeout(handle as Parameters<typeof clearTimeout>[0]),
};

export class ExplorerController {
  readonly debounceMs: number;
  state: ViewState;
  requestCount = 0;

  private seq = 0;
  private applied = 0;
  private pending: unknown = null;
  private abort: AbortController | null = null;
  private readonly timers: Timers;

  constructor(
    private readonly api: Api,
    private readonly years: number[],
    private readonly portsByYear: Record<string, string[]>,
    private readonly events: ControllerEvents = {},
    options: { debounceMs?: number; timers?: Timers; initial?: ViewState } = {},
  ) {
    this.debounceMs = options.debounceMs ?? 150;
    this.timers = options.timers ?? REAL_TIMERS;
    this.state =
      options.initial ??
      defaultState(years[years.length - 1], this.portsOf(years[years.length - 1]));
  }

  portsOf(year: number): string[] {
    return this.portsByYear[String(year)] ?? [];
  }

  // -- mutations -----------------------------------------------------------

  setYear(year: number): void {
    if (!this.years.includes(year)) {
      this.events.onError?.(`year ${year} not available`);
      return;
    }
    const ports = this.state.ports.filter((p) => this.portsOf(year).includes(p));
    this.update({ ...this.state, year, ports });
  }

  setPorts(ports: string[]): void {
    this.update({ ...this.state, ports: normalizePorts(ports) });
  }

  togglePort(port: string): void {
    const has = this.state.ports.includes(port);
    this.setPorts(
      has
        ? this.state.ports.filter((p) => p !== port)
        : [...this.state.ports, port],
    );
  }

  setBandwidth(h: number): void {
    if (!isValidBandwidth(h)) {
      this.events.onError?.(`bandwidth ${h} km outside [0.5, 2] km`);
      return;
    }
    this.update({ ...this.state, h });
  }

  setLayer(name: keyof ViewState["layers"], visible: boolean): void {
    // layer toggles never refetch the surface
    this.state = {
      ...this.state,
      layers: { ...this.state.layers, [name]: visible },
    };
    this.events.onState?.(this.state);
  }

  replaceState(state: ViewState): void {
    this.update(state);
  }

  // -- request machinery ----------------------------------------------------

  private update(state: ViewState): void {
    this.state = state;
    this.events.onState?.(state);
    if (state.ports.length === 0) {
      // deselecting the last port disables the surface and prompts instead
      this.cancelPending();
      this.events.onPrompt?.("select at least one point-of-sale");
      return;
    }
    const problem = validateAgainstMeta(
      state,
      this.years,
      this.portsOf(state.year),
    );
    if (problem !== null) {
      this.events.onError?.(problem);
      return;
    }
    this.schedule();
  }

  private cancelPending(): void {
    if (this.pending !== null) {
      this.timers.clear(this.pending);
      this.pending = null;
    }
  }

  private schedule(): void {
    this.cancelPending();
    this.pending = this.timers.set(() => {
      this.pending = null;
      void this.fire();
    }, this.debounceMs);
  }

  private async fire(): Promise<void> {
    const mySeq = ++this.seq;
    const snapshot = this.state;
    this.abort?.abort();
    this.abort = new AbortController();
    this.requestCount += 1;
    try {
      const grid = await this.api.surface(
        snapshot.year,
        snapshot.ports,
        snapshot.h,
        this.abort.signal,
      );
      if (mySeq <= this.applied || mySeq < this.seq) return; // superseded
      this.applied = mySeq;
      this.events.onSurface?.(grid, snapshot);
    } catch (err) {
      if ((err as Error).name === "AbortError") return;
      if (mySeq < this.seq) return; // a newer request owns the error channel
      this.events.onError?.((err as Error).message);
    }
  }
}
