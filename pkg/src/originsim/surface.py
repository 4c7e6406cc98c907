"""Matérn-covariance Gaussian-process machinery.

Covariance evaluation, GP log-density, empirical variogram with
Cressie-weighted fitting, simple (zero-mean) kriging onto a raster,
normalization of a kriged surface into a probability density, and direct
inversion sampling of capture locations from that density.

The solve matrix throughout is ``cov_matrix(points) + nugget * I``, i.e. the
nugget enters once inside the covariance matrix and once more in the solve,
which is the documented contract of the log-density and predictor here (see
``gp_log_density``). With ``nugget=0`` this is classical simple kriging and
interpolates observations exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import linalg as spl
from scipy import special
from scipy.optimize import nnls
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import (
    DomainError,
    EmptyVariogramError,
    EmptyYearError,
    FitError,
    NormalizationError,
    NumericalError,
)
from .geodata import ConflictEvent, GeoFrame, active_conflicts
from .grids import GridSpec, IntensityGrid

__all__ = [
    "CovarianceParams",
    "EmpiricalVariogram",
    "MaternKriging",
    "cov_matrix",
    "empirical_variogram",
    "fit_variogram",
    "gp_log_density",
    "krig_surface",
    "matern_correlation",
    "matern_cov",
    "normalize_to_pdf",
    "sample_origins",
]

# below this scaled distance the Matérn correlation is 1 to double precision
_TINY_SCALED_DIST = 1e-12


@dataclass(frozen=True)
class CovarianceParams:
    """Matérn covariance parameters.

    Attributes
    ----------
    nu : float
        Smoothness. Half-integer values 0.5, 1.5, 2.5 use closed forms.
    inv_range : float
        Inverse range ``a`` in 1/km; the correlation argument is
        ``a * distance``.
    sill : float
        Process variance (intensity units squared).
    nugget : float
        Micro-scale / measurement variance, >= 0.
    """

    nu: float
    inv_range: float
    sill: float
    nugget: float = 0.0

    def __post_init__(self):
        if not (self.nu > 0 and math.isfinite(self.nu)):
            raise DomainError(f"nu must be positive, got {self.nu}")
        if not (self.inv_range > 0 and math.isfinite(self.inv_range)):
            raise DomainError(f"inv_range must be positive, got {self.inv_range}")
        if not (self.sill > 0 and math.isfinite(self.sill)):
            raise DomainError(f"sill must be positive, got {self.sill}")
        if not (self.nugget >= 0 and math.isfinite(self.nugget)):
            raise DomainError(f"nugget must be >= 0, got {self.nugget}")


def matern_correlation(scaled_dist, nu: float) -> np.ndarray:
    """Unit-sill Matérn correlation as a function of ``a * d``.

    ``(2^(1-nu) / Gamma(nu)) * x^nu * K_nu(x)``, continuous at 0 with value 1.
    Closed forms for nu in {0.5, 1.5, 2.5}, modified-Bessel evaluation
    otherwise.
    """
    x = np.asarray(scaled_dist, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if np.any(x < 0):
        raise DomainError("distances must be nonnegative")
    if nu == 0.5:
        out = np.exp(-x)
    elif nu == 1.5:
        out = (1.0 + x) * np.exp(-x)
    elif nu == 2.5:
        out = (1.0 + x + x * x / 3.0) * np.exp(-x)
    else:
        out = np.ones_like(x)
        big = x > _TINY_SCALED_DIST
        xb = x[big]
        coef = 2.0 ** (1.0 - nu) / special.gamma(nu)
        vals = coef * xb ** nu * special.kv(nu, xb)
        # K_nu underflows for large arguments; the correlation is 0 there
        out[big] = np.nan_to_num(vals, nan=0.0, posinf=0.0, neginf=0.0)
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out


def matern_cov(d, p: CovarianceParams, include_nugget: bool = False):
    """Matérn covariance at distance ``d`` km.

    ``sill * correlation(inv_range * d)`` plus ``nugget`` iff
    ``include_nugget`` and ``d == 0``.
    """
    d = np.asarray(d, dtype=float)
    scalar = d.ndim == 0
    d = np.atleast_1d(d)
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise DomainError("distances must be finite and nonnegative")
    out = p.sill * matern_correlation(p.inv_range * d, p.nu)
    if include_nugget and p.nugget > 0:
        out = out + np.where(d == 0.0, p.nugget, 0.0)
    return float(out[0]) if scalar else out


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError(f"expected (n, 2) km points, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise DomainError("points must be finite")
    return pts


def cov_matrix(points, p: CovarianceParams) -> np.ndarray:
    """Covariance matrix with the nugget on the diagonal.

    Entry (i, j) is ``matern_cov(||s_i - s_j||, p, include_nugget=(i == j))``.
    """
    pts = _as_points(points)
    d = cdist(pts, pts)
    k = p.sill * matern_correlation(p.inv_range * d, p.nu)
    if p.nugget > 0:
        k[np.diag_indices_from(k)] += p.nugget
    return k


def _solve_matrix(points, p: CovarianceParams) -> np.ndarray:
    # kriging / density solve operator: one more nugget on top of cov_matrix
    a = cov_matrix(points, p)
    if p.nugget > 0:
        a[np.diag_indices_from(a)] += p.nugget
    return a


def _cho_factor(a: np.ndarray, context: str):
    try:
        return spl.cho_factor(a, lower=True)
    except spl.LinAlgError:
        cond = float(np.linalg.cond(a))
        raise NumericalError(
            f"{context}: covariance system not positive definite "
            f"(condition number ~{cond:.3e}); duplicate points with a zero "
            f"nugget are the usual cause, consider adding a nugget") from None


def gp_log_density(y, points, p: CovarianceParams) -> float:
    """Unnormalized Gaussian-process log-density of observations ``y``.

    ``-log det(A) - y^T A^{-1} y`` with ``A = cov_matrix + nugget * I``,
    computed through a Cholesky factorization, never an explicit inverse.
    """
    pts = _as_points(points)
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != pts.shape[0]:
        raise DomainError(
            f"{y.shape[0]} observations for {pts.shape[0]} points")
    a = _solve_matrix(pts, p)
    c, lower = _cho_factor(a, "gp_log_density")
    logdet = 2.0 * float(np.sum(np.log(np.diag(c))))
    alpha = spl.cho_solve((c, lower), y)
    return -logdet - float(y @ alpha)


# ---------------------------------------------------------------------------
# variogram estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmpiricalVariogram:
    """Binned method-of-moments semivariance estimates."""

    bin_centers: np.ndarray
    gamma_hat: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        bc = np.asarray(self.bin_centers, dtype=float)
        gh = np.asarray(self.gamma_hat, dtype=float)
        ct = np.asarray(self.counts, dtype=int)
        if not (bc.shape == gh.shape == ct.shape):
            raise DomainError("variogram arrays must have equal length")
        if np.any(np.diff(bc) <= 0):
            raise DomainError("bin centers must be strictly increasing")
        if np.any(ct < 0):
            raise DomainError("pair counts must be nonnegative")
        object.__setattr__(self, "bin_centers", bc)
        object.__setattr__(self, "gamma_hat", gh)
        object.__setattr__(self, "counts", ct)

    @property
    def occupied(self) -> np.ndarray:
        return self.counts > 0


def empirical_variogram(points, values, n_bins: int = 15,
                        max_dist: float = 100.0) -> EmpiricalVariogram:
    """Matheron binned semivariance over equal-width distance bins.

    Bin j collects pairs with distance in ``(j*w, (j+1)*w]`` for
    ``w = max_dist / n_bins`` and holds ``sum (y_i - y_k)^2 / (2 N_j)``.
    Empty bins carry count 0 and semivariance 0.
    """
    pts = _as_points(points)
    y = np.asarray(values, dtype=float).ravel()
    if pts.shape[0] != y.shape[0]:
        raise DomainError("points/values length mismatch")
    if pts.shape[0] < 2:
        raise DomainError("need at least 2 points for a variogram")
    if not (max_dist > 0 and n_bins >= 1):
        raise DomainError("max_dist must be positive and n_bins >= 1")

    iu, ju = np.triu_indices(pts.shape[0], k=1)
    d = np.sqrt(((pts[iu] - pts[ju]) ** 2).sum(axis=1))
    sq = (y[iu] - y[ju]) ** 2
    keep = d <= max_dist
    if not np.any(keep):
        raise EmptyVariogramError(
            f"all {d.size} pairs lie beyond max_dist={max_dist} km")
    d, sq = d[keep], sq[keep]
    width = max_dist / n_bins
    # upper-closed bins (j*w, (j+1)*w]; coincident pairs land in bin 0
    idx = np.minimum(np.maximum(np.ceil(d / width).astype(int) - 1, 0),
                     n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    sums = np.bincount(idx, weights=sq, minlength=n_bins)
    gamma = np.zeros(n_bins)
    occ = counts > 0
    gamma[occ] = sums[occ] / (2.0 * counts[occ])
    centers = (np.arange(n_bins) + 0.5) * width
    return EmpiricalVariogram(centers, gamma, counts)


def model_semivariance(h, nu: float, inv_range: float, sill: float,
                       nugget: float) -> np.ndarray:
    """``nugget + sill * (1 - correlation(a h))`` for separations h > 0."""
    h = np.asarray(h, dtype=float)
    return nugget + sill * (1.0 - matern_correlation(inv_range * h, nu))


def fit_variogram(emp: EmpiricalVariogram, nu: float, inv_range: float,
                  max_iter: int = 100, tol: float = 1e-10) -> tuple[float, float]:
    """Fit (sill, nugget) to an empirical variogram by Cressie-weighted WLS.

    Minimizes ``sum_j w_j (gamma_hat_j - gamma_model(h_j))^2`` with weights
    ``w_j = N_j / gamma_model(h_j)^2``, iterating the reweighting and solving
    each weighted least-squares step over the nonnegative quadrant. Smoothness
    and inverse range stay fixed.

    Raises ``FitError`` (carrying the last iterate) on non-convergence.
    """
    occ = emp.occupied
    if int(occ.sum()) < 2:
        raise DomainError("need at least 2 occupied bins to fit a variogram")
    h = emp.bin_centers[occ]
    gam = emp.gamma_hat[occ]
    n_pairs = emp.counts[occ].astype(float)

    shape = 1.0 - matern_correlation(inv_range * h, nu)  # sill multiplier
    design = np.column_stack([shape, np.ones_like(h)])

    # initial weights from pair counts alone
    weights = n_pairs.copy()
    params = None
    for _ in range(max_iter):
        sw = np.sqrt(weights)
        coef, _ = nnls(design * sw[:, None], gam * sw)
        new = (float(coef[0]), float(coef[1]))
        if params is not None and (
                abs(new[0] - params[0]) <= tol * (1.0 + abs(params[0]))
                and abs(new[1] - params[1]) <= tol * (1.0 + abs(params[1]))):
            return new
        params = new
        model = model_semivariance(h, nu, inv_range, params[0], params[1])
        weights = n_pairs / np.maximum(model, 1e-12) ** 2
    raise FitError(
        f"variogram fit did not converge in {max_iter} iterations",
        last_iterate=params)


# ---------------------------------------------------------------------------
# kriging
# ---------------------------------------------------------------------------

class MaternKriging(BaseEstimator, RegressorMixin):
    """Zero-mean simple kriging with a Matérn covariance.

    Parameters
    ----------
    nu : float, default=5.0
        Matérn smoothness.
    inv_range : float, default=0.1
        Inverse range in 1/km (0.1 corresponds to a 10 km range under the
        reciprocal convention used throughout).
    sill : float, default=1.0
        Process variance.
    nugget : float, default=0.0
        Nugget variance; with 0 the fit interpolates exactly.

    After ``fit(X, y)`` the ``predict(X0)`` method returns
    ``sill * k(X0, X) @ (cov_matrix(X) + nugget I)^{-1} y``, which decays to
    zero far from every observation.
    """

    def __init__(self, nu: float = 5.0, inv_range: float = 0.1,
                 sill: float = 1.0, nugget: float = 0.0):
        self.nu = nu
        self.inv_range = inv_range
        self.sill = sill
        self.nugget = nugget

    def _params(self) -> CovarianceParams:
        return CovarianceParams(nu=self.nu, inv_range=self.inv_range,
                                sill=self.sill, nugget=self.nugget)

    def fit(self, X, y):
        X = check_array(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[1] != 2:
            raise DomainError("MaternKriging expects (n, 2) km coordinates")
        if y.shape[0] != X.shape[0]:
            raise DomainError("X and y length mismatch")
        p = self._params()
        a = _solve_matrix(X, p)
        c, lower = _cho_factor(a, "kriging fit")
        self.X_ = X.copy()
        self.dual_coef_ = spl.cho_solve((c, lower), y)
        return self

    def predict(self, X):
        check_is_fitted(self, "dual_coef_")
        X = check_array(X, dtype=float)
        p = self._params()
        k0 = p.sill * matern_correlation(
            p.inv_range * cdist(X, self.X_), p.nu)
        return k0 @ self.dual_coef_


def krig_surface(events: Iterable[ConflictEvent], p: CovarianceParams,
                 grid: GridSpec, year: int, frame: GeoFrame) -> IntensityGrid:
    """Krig the year's active conflicts onto a raster.

    Filters ``events`` through :func:`active_conflicts` for ``year``,
    projects them into ``frame``, fits the zero-mean predictor and evaluates
    it at every cell center. Raises ``EmptyYearError`` when the year has no
    active conflicts.
    """
    active = active_conflicts(events, year)
    if not active:
        raise EmptyYearError(f"no active conflicts in {year}")
    lon = np.array([e.lon for e in active])
    lat = np.array([e.lat for e in active])
    x, y = frame.project(lon, lat)
    pts = np.column_stack([x, y])
    obs = np.array([float(e.intensity) for e in active])

    model = MaternKriging(nu=p.nu, inv_range=p.inv_range, sill=p.sill,
                          nugget=p.nugget).fit(pts, obs)
    values = model.predict(grid.cell_centers())
    return IntensityGrid(grid, values.reshape(grid.ny, grid.nx), "intensity")


def normalize_to_pdf(g: IntensityGrid) -> IntensityGrid:
    """Clamp negatives to zero and divide by the integral.

    The kriged surface is reinterpreted as a probability density of capture
    locations, which must be nonnegative; small negative kriging artifacts
    are therefore clipped before normalizing.
    """
    values = np.maximum(g.values, 0.0)
    total = float(values.sum()) * g.spec.cell_area
    if total <= 0.0:
        raise NormalizationError("surface has no positive mass to normalize")
    return IntensityGrid(g.spec, values / total, "pdf")


def sample_origins(pdf: IntensityGrid, n: int, seed) -> np.ndarray:
    """Draw ``n`` km-points from a pdf grid by direct inversion.

    A cell is drawn by inverting the cumulative cell-mass distribution, then
    the point is jittered uniformly within the cell. Deterministic for a
    fixed seed.
    """
    if pdf.kind != "pdf":
        raise DomainError(f"sample_origins needs a pdf grid, got {pdf.kind!r}")
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = np.random.default_rng(seed)
    masses = pdf.cell_masses()
    cum = np.cumsum(masses)
    cum /= cum[-1]
    u = rng.random(n)
    idx = np.searchsorted(cum, u, side="right")
    iy, ix = np.divmod(idx, pdf.spec.nx)
    jitter = rng.random((n, 2))
    xs = pdf.spec.x_min + (ix + jitter[:, 0]) * pdf.spec.dx
    ys = pdf.spec.y_min + (iy + jitter[:, 1]) * pdf.spec.dy
    return np.column_stack([xs, ys])
