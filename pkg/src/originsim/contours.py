"""Marching-squares contour extraction from an intensity raster.

Contours live on the cell-center lattice with linearly interpolated
crossings; adjacent segments are stitched into polylines. Ten evenly spaced
interior levels are the serving default.
"""

from __future__ import annotations

import numpy as np

from .grids import IntensityGrid

# segment endpoints per marching-squares case, as (edge_a, edge_b) pairs;
# edges: 0=bottom, 1=right, 2=top, 3=left; cases 5 and 10 are saddles
_CASES: dict[int, list[tuple[int, int]]] = {
    1: [(3, 0)],
    2: [(0, 1)],
    3: [(3, 1)],
    4: [(1, 2)],
    6: [(0, 2)],
    7: [(3, 2)],
    8: [(2, 3)],
    9: [(0, 2)],
    11: [(1, 2)],
    12: [(1, 3)],
    13: [(0, 1)],
    14: [(3, 0)],
}


def _edge_point(edge: int, level: float, x0, x1, y0, y1, c0, c1, c2, c3):
    # corner layout: c0=(x0,y0) c1=(x1,y0) c2=(x1,y1) c3=(x0,y1)
    if edge == 0:
        t = (level - c0) / (c1 - c0)
        return (x0 + t * (x1 - x0), y0)
    if edge == 1:
        t = (level - c1) / (c2 - c1)
        return (x1, y0 + t * (y1 - y0))
    if edge == 2:
        t = (level - c3) / (c2 - c3)
        return (x0 + t * (x1 - x0), y1)
    t = (level - c0) / (c3 - c0)
    return (x0, y0 + t * (y1 - y0))


def _cell_segments(level, x0, x1, y0, y1, c0, c1, c2, c3):
    code = ((c0 >= level) * 1 + (c1 >= level) * 2
            + (c2 >= level) * 4 + (c3 >= level) * 8)
    if code in (0, 15):
        return []
    if code in (5, 10):
        center_high = (c0 + c1 + c2 + c3) / 4.0 >= level
        if code == 5:
            pairs = [(3, 2), (0, 1)] if center_high else [(3, 0), (1, 2)]
        else:
            pairs = [(0, 3), (1, 2)] if center_high else [(0, 1), (2, 3)]
    else:
        pairs = _CASES[code]
    args = (level, x0, x1, y0, y1, c0, c1, c2, c3)
    return [(_edge_point(a, *args), _edge_point(b, *args)) for a, b in pairs]


def _stitch(segments, decimals: int = 9):
    key = lambda p: (round(p[0], decimals), round(p[1], decimals))
    by_end: dict = {}
    for i, (a, b) in enumerate(segments):
        by_end.setdefault(key(a), []).append(i)
        by_end.setdefault(key(b), []).append(i)
    used = [False] * len(segments)
    lines = []
    for i in range(len(segments)):
        if used[i]:
            continue
        used[i] = True
        a, b = segments[i]
        chain = [a, b]
        for endpoint_side in (True, False):  # grow at tail, then at head
            while True:
                tail = chain[-1] if endpoint_side else chain[0]
                found = None
                for j in by_end.get(key(tail), ()):
                    if not used[j]:
                        found = j
                        break
                if found is None:
                    break
                used[found] = True
                sa, sb = segments[found]
                nxt = sb if key(sa) == key(tail) else sa
                if endpoint_side:
                    chain.append(nxt)
                else:
                    chain.insert(0, nxt)
        lines.append([[float(x), float(y)] for x, y in chain])
    return lines


def contour_lines(grid: IntensityGrid, level: float) -> list[list[list[float]]]:
    """Polylines (km coordinates) where the surface crosses ``level``."""
    xs = grid.spec.x_centers()
    ys = grid.spec.y_centers()
    v = grid.values
    segments = []
    for iy in range(grid.spec.ny - 1):
        for ix in range(grid.spec.nx - 1):
            c0, c1 = v[iy, ix], v[iy, ix + 1]
            c3, c2 = v[iy + 1, ix], v[iy + 1, ix + 1]
            lo = min(c0, c1, c2, c3)
            hi = max(c0, c1, c2, c3)
            if lo >= level or hi < level:
                continue
            segments.extend(_cell_segments(
                level, xs[ix], xs[ix + 1], ys[iy], ys[iy + 1],
                c0, c1, c2, c3))
    return _stitch(segments)


def default_levels(grid: IntensityGrid, n_levels: int = 10) -> list[float]:
    """Evenly spaced interior levels; empty for a constant surface."""
    vmin = float(grid.values.min())
    vmax = float(grid.values.max())
    if vmax <= vmin:
        return []
    return [float(l) for l in np.linspace(vmin, vmax, n_levels + 2)[1:-1]]


def contour_layer(grid: IntensityGrid, n_levels: int = 10) -> list[dict]:
    """All contours of a grid at the default levels."""
    return [{"level": level, "lines": contour_lines(grid, level)}
            for level in default_levels(grid, n_levels)]
