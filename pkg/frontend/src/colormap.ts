/** Viridis color ramp (perceptually uniform) sampled at 32 anchors. */

const ANCHORS: [number, number, number][] = [
  [68, 1, 84], [71, 13, 96], [72, 24, 106], [72, 35, 116],
  [71, 45, 123], [69, 55, 129], [66, 64, 134], [62, 73, 137],
  [58, 82, 139], [54, 90, 140], [50, 98, 141], [46, 106, 142],
  [43, 114, 142], [40, 121, 142], [37, 129, 142], [34, 136, 141],
  [31, 144, 140], [29, 151, 138], [30, 159, 136], [34, 166, 132],
  [42, 173, 126], [53, 180, 119], [66, 187, 110], [81, 193, 99],
  [98, 199, 86], [116, 204, 72], [136, 208, 57], [157, 211, 42],
  [178, 214, 30], [199, 216, 26], [221, 217, 31], [253, 231, 37],
];

/** Map t in [0, 1] to an [r, g, b] triple along the ramp. */
export function viridis(t: number): [number, number, number] {
  const clamped = Math.min(Math.max(t, 0), 1);
  const pos = clamped * (ANCHORS.length - 1);
  const i = Math.min(Math.floor(pos), ANCHORS.length - 2);
  const frac = pos - i;
  const a = ANCHORS[i];
  const b = ANCHORS[i + 1];
  return [
    Math.round(a[0] + frac * (b[0] - a[0])),
    Math.round(a[1] + frac * (b[1] - a[1])),
    Math.round(a[2] + frac * (b[2] - a[2])),
  ];
}

/**
 * Rasterize a row-major grid into RGBA bytes (one pixel per cell, row 0 at
 * the bottom). Pure so equal grids always produce identical bytes; alpha
 * scales with normalized value so the basemap stays visible under low mass.
 */
export function rasterizeGrid(
  values: number[],
  nx: number,
  ny: number,
  opacity = 0.85,
): Uint8ClampedArray {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  const span = hi > lo ? hi - lo : 1;
  const out = new Uint8ClampedArray(nx * ny * 4);
  for (let iy = 0; iy < ny; iy++) {
    for (let ix = 0; ix < nx; ix++) {
      const t = (values[iy * nx + ix] - lo) / span;
      const [r, g, b] = viridis(t);
      // flip vertically: canvas rows grow downward, grid rows grow upward
      const px = ((ny - 1 - iy) * nx + ix) * 4;
      out[px] = r;
      out[px + 1] = g;
      out[px + 2] = b;
      out[px + 3] = Math.round(255 * opacity * Math.min(1, 0.15 + 0.85 * t));
    }
  }
  return out;
}
