/** DOM wiring: sliders and toggles feed the controller, the controller and
 * layer cache feed the canvas. */

import { HttpApi } from "./api.js";
import { ExplorerController } from "./controller.js";
import { Layers, renderLegend, renderView } from "./render.js";
import {
  ViewState,
  decodeState,
  defaultState,
  encodeState,
} from "./state.js";
import {
  ConflictJson,
  ContourJson,
  GridJson,
  LAYERS,
  LayerName,
  MetaJson,
  NetworkJson,
  PolicyJson,
  RegionJson,
} from "./types.js";

const api = new HttpApi(
  (window as unknown as { ORIGINSIM_API?: string }).ORIGINSIM_API ?? "",
);

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

async function boot(): Promise<void> {
  const meta: MetaJson = await api.meta();
  if (meta.years.length === 0) {
    el<HTMLDivElement>("banner").textContent =
      "no exported years found; run the export-bundle command first";
    return;
  }

  const canvas = el<HTMLCanvasElement>("map");
  const legend = el<HTMLCanvasElement>("legend");
  const banner = el<HTMLDivElement>("banner");
  const prompt = el<HTMLDivElement>("prompt");
  const yearSlider = el<HTMLInputElement>("year");
  const yearLabel = el<HTMLSpanElement>("year-label");
  const hSlider = el<HTMLInputElement>("bandwidth");
  const hLabel = el<HTMLSpanElement>("bandwidth-label");
  const portsBox = el<HTMLDivElement>("ports");

  const layers: Layers = {};
  let surface: GridJson | undefined;
  const layerCache = new Map<string, unknown>();

  const fromHash = decodeState(window.location.hash);
  let notice = "";
  let initial: ViewState;
  if (window.location.hash && fromHash === null) {
    notice = "unreadable view link; showing defaults";
    initial = defaultState(
      meta.years[meta.years.length - 1],
      meta.ports[String(meta.years[meta.years.length - 1])] ?? [],
    );
  } else {
    initial =
      fromHash ??
      defaultState(
        meta.years[meta.years.length - 1],
        meta.ports[String(meta.years[meta.years.length - 1])] ?? [],
      );
  }

  function redraw(state: ViewState): void {
    layers.surface = state.layers.heatmap ? surface : undefined;
    renderView(canvas, state, layers, meta.frame);
    renderLegend(legend, state.layers.heatmap ? surface : undefined);
  }

  async function ensureLayers(state: ViewState): Promise<void> {
    const wanted: [LayerName, string][] = [
      ["conflicts", "conflicts"],
      ["contours", "contours"],
      ["network", "network"],
      ["borders", "borders"],
    ];
    for (const [layer, kind] of wanted) {
      if (!state.layers[layer]) continue;
      const key = `${state.year}:${kind}`;
      if (!layerCache.has(key)) {
        layerCache.set(key, await api.layer(state.year, kind));
      }
      const value = layerCache.get(key);
      if (kind === "conflicts") layers.conflicts = value as ConflictJson[];
      if (kind === "contours") layers.contours = value as ContourJson[];
      if (kind === "network") {
        layers.network = value as NetworkJson;
        const pkey = `${state.year}:policy`;
        if (!layerCache.has(pkey)) {
          layerCache.set(pkey, await api.layer(state.year, "policy"));
        }
        layers.policy = layerCache.get(pkey) as PolicyJson;
      }
      if (kind === "borders") layers.borders = value as RegionJson[];
    }
  }

  const controller = new ExplorerController(
    api,
    meta.years,
    meta.ports,
    {
      onSurface: (grid, state) => {
        surface = grid;
        prompt.textContent = "";
        void ensureLayers(state).then(() => redraw(state));
      },
      onError: (message) => {
        banner.textContent = message;
        banner.classList.add("visible");
        setTimeout(() => banner.classList.remove("visible"), 4000);
      },
      onPrompt: (message) => {
        surface = undefined;
        prompt.textContent = message;
        redraw(controller.state);
      },
      onState: (state) => {
        window.history.replaceState(null, "", encodeState(state));
        yearSlider.value = String(state.year);
        yearLabel.textContent = String(state.year);
        hSlider.value = String(state.h);
        hLabel.textContent = `${state.h.toFixed(2)} km`;
        renderPortBoxes(state);
        for (const name of LAYERS) {
          el<HTMLInputElement>(`layer-${name}`).checked = state.layers[name];
        }
        void ensureLayers(state).then(() => redraw(state));
      },
    },
    { initial },
  );

  function renderPortBoxes(state: ViewState): void {
    const ports = controller.portsOf(state.year);
    portsBox.innerHTML = "";
    for (const port of ports) {
      const label = document.createElement("label");
      const box = document.createElement("input");
      box.type = "checkbox";
      box.checked = state.ports.includes(port);
      box.addEventListener("change", () => controller.togglePort(port));
      label.appendChild(box);
      label.appendChild(document.createTextNode(port));
      portsBox.appendChild(label);
    }
  }

  yearSlider.min = String(Math.min(...meta.years));
  yearSlider.max = String(Math.max(...meta.years));
  yearSlider.addEventListener("input", () =>
    controller.setYear(Number(yearSlider.value)),
  );
  hSlider.min = String(meta.bandwidth_km.min);
  hSlider.max = String(meta.bandwidth_km.max);
  hSlider.step = "0.05";
  hSlider.addEventListener("input", () =>
    controller.setBandwidth(Number(hSlider.value)),
  );
  for (const name of LAYERS) {
    el<HTMLInputElement>(`layer-${name}`).addEventListener("change", (ev) =>
      controller.setLayer(name, (ev.target as HTMLInputElement).checked),
    );
  }
  window.addEventListener("hashchange", () => {
    const state = decodeState(window.location.hash);
    if (state) controller.replaceState(state);
  });

  if (notice) {
    banner.textContent = notice;
    banner.classList.add("visible");
    setTimeout(() => banner.classList.remove("visible"), 4000);
  }
  controller.replaceState(initial);
}

void boot();
