"""Rectangular rasters over the study region.

An :class:`IntensityGrid` is the common currency between the kriging,
density-estimation, sampling, and serving layers. Values live at cell
centers in a row-major ``(ny, nx)`` array: flat index ``iy * nx + ix`` with
``ix`` counting from ``x_min`` and ``iy`` from ``y_min``.

The JSON form ``{x_min, x_max, y_min, y_max, nx, ny, kind, values}`` is the
compatibility contract consumed by the CLI, server, and UI.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
import numpy as np

from .errors import CoverageError, DomainError

GRID_KINDS = ("intensity", "pdf", "kde")

#: tolerance on the pdf unit-integral invariant
PDF_INTEGRAL_TOL = 1e-6


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a raster: bounds in km plus cell counts."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int = 256
    ny: int = 192

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise DomainError("grid must have nx, ny >= 2")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise DomainError("grid bounds must have positive extent")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    def x_centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 0.5) * self.dx

    def y_centers(self) -> np.ndarray:
        return self.y_min + (np.arange(self.ny) + 0.5) * self.dy

    def cell_centers(self) -> np.ndarray:
        """All cell centers as an ``(nx * ny, 2)`` array in flat-index order."""
        xs, ys = np.meshgrid(self.x_centers(), self.y_centers())
        return np.column_stack([xs.ravel(), ys.ravel()])

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return ((pts[:, 0] >= self.x_min) & (pts[:, 0] <= self.x_max)
                & (pts[:, 1] >= self.y_min) & (pts[:, 1] <= self.y_max))

    @classmethod
    def around_points(cls, points, nx: int = 256, ny: int = 192,
                      pad_km: float = 25.0) -> "GridSpec":
        """Bounding box of ``points`` padded by ``pad_km`` on every side."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.size == 0:
            raise DomainError("cannot build a grid around zero points")
        return cls(
            x_min=float(pts[:, 0].min() - pad_km),
            x_max=float(pts[:, 0].max() + pad_km),
            y_min=float(pts[:, 1].min() - pad_km),
            y_max=float(pts[:, 1].max() + pad_km),
            nx=nx, ny=ny,
        )


class IntensityGrid:
    """A raster of intensity, pdf, or kde values over a :class:`GridSpec`."""

    def __init__(self, spec: GridSpec, values, kind: str):
        values = np.asarray(values, dtype=float)
        if values.shape == (spec.n_cells,):
            values = values.reshape(spec.ny, spec.nx)
        if values.shape != (spec.ny, spec.nx):
            raise DomainError(
                f"values shape {values.shape} does not match grid "
                f"({spec.ny}, {spec.nx})")
        if kind not in GRID_KINDS:
            raise DomainError(f"unknown grid kind {kind!r}")
        if not np.all(np.isfinite(values)):
            raise DomainError("grid values must be finite")
        if kind in ("pdf", "kde"):
            if np.any(values < 0):
                raise DomainError(f"{kind} grid has negative values")
            integral = float(values.sum() * spec.cell_area)
            if abs(integral - 1.0) > PDF_INTEGRAL_TOL:
                raise DomainError(
                    f"{kind} grid integrates to {integral!r}, not 1")
        self.spec = spec
        self.values = values
        self.values.setflags(write=False)
        self.kind = kind

    # -- access ------------------------------------------------------------

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def cell_masses(self) -> np.ndarray:
        return self.flat * self.spec.cell_area

    def interp(self, points) -> np.ndarray:
        """Bilinear interpolation between cell centers at ``points``.

        Points must lie within the grid bounds (``CoverageError`` otherwise);
        within the outer half-cell ring the edge value extends constantly.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = self.spec.contains(pts)
        if not np.all(inside):
            bad = pts[~inside][0]
            raise CoverageError(
                f"point ({bad[0]:.3f}, {bad[1]:.3f}) km outside grid bounds")
        spec = self.spec
        gx = (pts[:, 0] - spec.x_min) / spec.dx - 0.5
        gy = (pts[:, 1] - spec.y_min) / spec.dy - 0.5
        ix0 = np.clip(np.floor(gx).astype(int), 0, spec.nx - 2)
        iy0 = np.clip(np.floor(gy).astype(int), 0, spec.ny - 2)
        tx = np.clip(gx - ix0, 0.0, 1.0)
        ty = np.clip(gy - iy0, 0.0, 1.0)
        v = self.values
        out = ((1 - tx) * (1 - ty) * v[iy0, ix0]
               + tx * (1 - ty) * v[iy0, ix0 + 1]
               + (1 - tx) * ty * v[iy0 + 1, ix0]
               + tx * ty * v[iy0 + 1, ix0 + 1])
        return out

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        s = self.spec
        return {
            "x_min": s.x_min, "x_max": s.x_max,
            "y_min": s.y_min, "y_max": s.y_max,
            "nx": s.nx, "ny": s.ny,
            "kind": self.kind,
            "values": [float(v) for v in self.flat],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, obj: dict) -> "IntensityGrid":
        spec = GridSpec(
            x_min=float(obj["x_min"]), x_max=float(obj["x_max"]),
            y_min=float(obj["y_min"]), y_max=float(obj["y_max"]),
            nx=int(obj["nx"]), ny=int(obj["ny"]))
        return cls(spec, np.asarray(obj["values"], dtype=float),
                   str(obj["kind"]))

    @classmethod
    def from_json(cls, text: str | bytes) -> "IntensityGrid":
        return cls.from_json_dict(json.loads(text))

    def __eq__(self, other):
        return (isinstance(other, IntensityGrid)
                and self.kind == other.kind
                and self.spec == other.spec
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        return (f"IntensityGrid(kind={self.kind!r}, nx={self.spec.nx}, "
                f"ny={self.spec.ny})")
