"""2-D Gaussian kernel density estimation onto rasters.

Used for the conflict-map comparison baseline and for conditional origin
heat maps given a selection of points-of-sale. Each point contributes an
isotropic bivariate Gaussian kernel ``exp(-r^2 / (2 h^2)) / (2 pi h^2 n)``;
the written-out single-``1/(nh)`` normalization seen elsewhere is not a valid
2-D density, so the standard bivariate constant is used and the grid is
additionally renormalized to integrate to exactly 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import DomainError, EmptySelectionError
from .grids import GridSpec, IntensityGrid

#: kernels are truncated at this many bandwidths; the discarded mass is
#: below 1e-8 of the total
TRUNCATION_RADIUS_H = 6.0


@dataclass(frozen=True)
class KdeSpec:
    """Bandwidth plus target raster for a density estimate."""

    bandwidth_h: float
    grid: GridSpec

    def __post_init__(self):
        if not self.bandwidth_h > 0:
            raise DomainError("bandwidth must be positive")


class GaussianHeatmap(BaseEstimator):
    """Gaussian KDE with an sklearn-style fit/evaluate surface.

    ``fit(X)`` stores the km points; ``grid_density(spec)`` rasterizes the
    estimate onto a grid, normalized to unit integral.
    """

    def __init__(self, bandwidth_km: float = 1.0):
        self.bandwidth_km = bandwidth_km

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        if X.shape[1] != 2:
            raise DomainError("GaussianHeatmap expects (n, 2) km points")
        self.X_ = X.copy()
        return self

    def grid_density(self, grid: GridSpec) -> IntensityGrid:
        check_is_fitted(self, "X_")
        return kde2d(self.X_, KdeSpec(self.bandwidth_km, grid))


def kde2d(points, spec: KdeSpec) -> IntensityGrid:
    """Rasterize the Gaussian KDE of ``points`` onto ``spec.grid``.

    Kernels are evaluated at cell centers within ``TRUNCATION_RADIUS_H``
    bandwidths of each point and the resulting surface is renormalized so
    the grid integrates to 1.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError(f"expected (n, 2) points, got shape {pts.shape}")
    if pts.shape[0] < 1:
        raise DomainError("kde2d needs at least one point")
    if not np.all(np.isfinite(pts)):
        raise DomainError("points must be finite")

    grid = spec.grid
    h = spec.bandwidth_h
    radius = TRUNCATION_RADIUS_H * h
    xs = grid.x_centers()
    ys = grid.y_centers()
    values = np.zeros((grid.ny, grid.nx))
    inv_two_h2 = 1.0 / (2.0 * h * h)

    for px, py in pts:
        ix0 = int(np.searchsorted(xs, px - radius, side="left"))
        ix1 = int(np.searchsorted(xs, px + radius, side="right"))
        iy0 = int(np.searchsorted(ys, py - radius, side="left"))
        iy1 = int(np.searchsorted(ys, py + radius, side="right"))
        if ix0 >= ix1 or iy0 >= iy1:
            continue
        dx2 = (xs[ix0:ix1] - px) ** 2
        dy2 = (ys[iy0:iy1] - py) ** 2
        values[iy0:iy1, ix0:ix1] += np.exp(
            -(dy2[:, None] + dx2[None, :]) * inv_two_h2)

    # bivariate Gaussian constant, then exact renormalization on the grid
    values /= 2.0 * np.pi * h * h * pts.shape[0]
    total = float(values.sum()) * grid.cell_area
    if total <= 0.0:
        raise DomainError(
            "all kernel mass fell outside the grid; enlarge the grid or "
            "the bandwidth")
    values /= total
    return IntensityGrid(grid, values, "kde")


def conditional_map(captives: Sequence, ports: Iterable[str],
                    spec: KdeSpec, method: str = "kde") -> IntensityGrid:
    """Density of capture points for captives sold at any of ``ports``.

    Union semantics over the selected points-of-sale; record order is
    preserved, so selecting every port reproduces ``kde2d`` over all capture
    points bit for bit. Raises ``EmptySelectionError`` when no captive
    matches (as opposed to an empty captive list, which is a DomainError).

    ``method="krig"`` exposes an alternative surface built by kriging
    unit-intensity markers at (at most 400, deterministically strided)
    selected capture points; the KDE path is the primary contract.
    """
    captives = list(captives)
    if not captives:
        raise DomainError("no captives supplied")
    wanted = set(ports)
    if not wanted:
        raise EmptySelectionError("no ports selected")
    pts = np.array([c.capture_point for c in captives if c.sale in wanted],
                   dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise EmptySelectionError(
            f"no captive was sold at any of {sorted(wanted)}")
    if method == "kde":
        return kde2d(pts, spec)
    if method == "krig":
        return _krig_of_points(pts, spec)
    raise DomainError(f"unknown conditional map method {method!r}")


def _krig_of_points(pts: np.ndarray, spec: KdeSpec,
                    max_obs: int = 400) -> IntensityGrid:
    from .surface import MaternKriging, normalize_to_pdf

    if pts.shape[0] > max_obs:
        stride = int(np.ceil(pts.shape[0] / max_obs))
        pts = pts[::stride]
    model = MaternKriging(nu=2.5, inv_range=1.0 / spec.bandwidth_h,
                          sill=1.0, nugget=1e-6)
    model.fit(pts, np.ones(pts.shape[0]))
    values = model.predict(spec.grid.cell_centers())
    raw = IntensityGrid(spec.grid, values.reshape(spec.grid.ny, spec.grid.nx),
                        "intensity")
    pdf = normalize_to_pdf(raw)
    return IntensityGrid(spec.grid, pdf.values, "kde")
