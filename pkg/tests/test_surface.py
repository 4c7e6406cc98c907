import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import special, stats

from originsim.errors import (
    DomainError,
    EmptyVariogramError,
    EmptyYearError,
    NormalizationError,
    NumericalError,
)
from originsim.geodata import ConflictEvent, GeoFrame
from originsim.grids import GridSpec, IntensityGrid
from originsim.surface import (
    CovarianceParams,
    EmpiricalVariogram,
    MaternKriging,
    cov_matrix,
    empirical_variogram,
    fit_variogram,
    gp_log_density,
    krig_surface,
    matern_cov,
    model_semivariance,
    normalize_to_pdf,
    sample_origins,
)


def bessel_oracle(d, nu, inv_range, sill):
    """Matérn covariance straight from the Bessel-function definition."""
    x = inv_range * np.asarray(d, dtype=float)
    out = np.empty_like(x)
    zero = x == 0
    out[zero] = 1.0
    xs = x[~zero]
    out[~zero] = (2.0 ** (1 - nu) / special.gamma(nu)
                  * xs ** nu * special.kv(nu, xs))
    return sill * out


class TestMaternCov:
    def test_zero_distance_with_nugget(self):
        p = CovarianceParams(nu=1.5, inv_range=1.0, sill=2.0, nugget=0.5)
        assert matern_cov(0.0, p, include_nugget=True) == pytest.approx(2.5)
        assert matern_cov(0.0, p, include_nugget=False) == pytest.approx(2.0)

    def test_exponential_closed_form(self):
        # nu = 1/2 reduces to sill * exp(-a d): at a=2.5, d=1 this is e^-2.5
        p = CovarianceParams(nu=0.5, inv_range=2.5, sill=1.0)
        assert matern_cov(1.0, p) == pytest.approx(0.0820849986238988,
                                                   rel=1e-12)

    def test_nu_three_halves_closed_form(self):
        # sill (1 + a d) exp(-a d): at a=1, d=2 this is 3 e^-2
        p = CovarianceParams(nu=1.5, inv_range=1.0, sill=1.0)
        assert matern_cov(2.0, p) == pytest.approx(0.4060058497098381,
                                                   rel=1e-12)

    @pytest.mark.parametrize("nu", [0.5, 1.5, 2.5])
    def test_half_integer_paths_match_bessel_oracle(self, nu):
        p = CovarianceParams(nu=nu, inv_range=0.7, sill=1.9)
        d = np.geomspace(1e-6, 50.0, 400)
        got = matern_cov(d, p)
        want = bessel_oracle(d, nu, 0.7, 1.9)
        assert_allclose(got, want, rtol=1e-10)

    def test_general_nu_continuous_at_zero(self):
        p = CovarianceParams(nu=5.0, inv_range=0.1, sill=3.0)
        assert matern_cov(0.0, p) == pytest.approx(3.0)
        assert matern_cov(1e-9, p) == pytest.approx(3.0, rel=1e-6)

    @pytest.mark.parametrize("nu", [0.5, 1.5, 2.5, 5.0])
    def test_monotone_nonincreasing(self, nu):
        p = CovarianceParams(nu=nu, inv_range=0.3, sill=1.0)
        d = np.linspace(0.0, 80.0, 500)
        vals = matern_cov(d, p)
        assert np.all(np.diff(vals) <= 1e-12)

    def test_invalid_params_rejected(self):
        for kwargs in ({"nu": 0.0}, {"inv_range": -1.0}, {"sill": 0.0},
                       {"nugget": -0.1}):
            full = {"nu": 1.5, "inv_range": 1.0, "sill": 1.0, "nugget": 0.0}
            full.update(kwargs)
            with pytest.raises(DomainError):
                CovarianceParams(**full)

    def test_negative_distance_rejected(self):
        p = CovarianceParams(nu=1.5, inv_range=1.0, sill=1.0)
        with pytest.raises(DomainError):
            matern_cov(-1.0, p)


class TestCovMatrix:
    def test_single_point(self):
        p = CovarianceParams(nu=1.5, inv_range=1.0, sill=2.0, nugget=0.5)
        m = cov_matrix([(0.0, 0.0)], p)
        assert m.shape == (1, 1)
        assert m[0, 0] == pytest.approx(2.5)

    def test_coincident_points_without_nugget(self):
        p = CovarianceParams(nu=1.5, inv_range=1.0, sill=2.0, nugget=0.0)
        m = cov_matrix([(1.0, 1.0), (1.0, 1.0)], p)
        assert_allclose(m, np.full((2, 2), 2.0))

    def test_process_part_is_psd(self):
        rng = np.random.default_rng(5)
        p = CovarianceParams(nu=2.5, inv_range=0.2, sill=1.3, nugget=0.7)
        pts = rng.uniform(0, 40, size=(5, 2))
        m = cov_matrix(pts, p) - 0.7 * np.eye(5)
        eigvals = np.linalg.eigvalsh(m)
        assert eigvals.min() >= -1e-8


class TestGpLogDensity:
    def test_zero_observations_leave_logdet(self):
        rng = np.random.default_rng(6)
        pts = rng.uniform(0, 20, size=(4, 2))
        p = CovarianceParams(nu=1.5, inv_range=0.3, sill=1.2, nugget=0.4)
        got = gp_log_density(np.zeros(4), pts, p)
        a = cov_matrix(pts, p) + 0.4 * np.eye(4)
        _, logdet = np.linalg.slogdet(a)
        assert got == pytest.approx(-logdet, rel=1e-12)

    def test_scalar_case(self):
        p = CovarianceParams(nu=1.5, inv_range=1.0, sill=1.0, nugget=0.0)
        assert gp_log_density([1.0], [(0.0, 0.0)], p) == pytest.approx(-1.0)

    def test_matches_explicit_inverse_oracle(self):
        rng = np.random.default_rng(7)
        pts = rng.uniform(0, 15, size=(4, 2))
        y = rng.normal(0, 2, size=4)
        nu, a, sill, nug = 1.5, 0.25, 1.7, 0.3
        p = CovarianceParams(nu=nu, inv_range=a, sill=sill, nugget=nug)
        # oracle built from the nu=3/2 closed form and a dense inverse;
        # the solve matrix carries the nugget twice: once inside the
        # covariance diagonal and once more in the solve
        d = np.sqrt(((pts[:, None] - pts[None, :]) ** 2).sum(-1))
        corr = (1 + a * d) * np.exp(-a * d)
        mat = sill * corr + 2 * nug * np.eye(4)
        want = (-np.log(np.linalg.det(mat))
                - y @ np.linalg.inv(mat) @ y)
        assert gp_log_density(y, pts, p) == pytest.approx(want, abs=1e-10)

    def test_true_params_beat_perturbed_nugget_on_average(self):
        rng = np.random.default_rng(8)
        pts = rng.uniform(0, 30, size=(25, 2))
        true = CovarianceParams(nu=1.5, inv_range=0.2, sill=1.0, nugget=0.2)
        a = cov_matrix(pts, true) + true.nugget * np.eye(25)
        chol = np.linalg.cholesky(a)
        wrong = CovarianceParams(nu=1.5, inv_range=0.2, sill=1.0, nugget=2.5)
        diffs = []
        for _ in range(20):
            y = chol @ rng.standard_normal(25)
            diffs.append(gp_log_density(y, pts, true)
                         - gp_log_density(y, pts, wrong))
        assert np.mean(diffs) > 0

    def test_non_pd_system_reports_numerical_error(self):
        p = CovarianceParams(nu=1.5, inv_range=1.0, sill=1.0, nugget=0.0)
        pts = [(0.0, 0.0), (0.0, 0.0)]  # exact duplicate, zero nugget
        with pytest.raises(NumericalError, match="nugget"):
            gp_log_density([1.0, 2.0], pts, p)


class TestEmpiricalVariogram:
    def test_two_point_hand_case(self):
        emp = empirical_variogram([(0.0, 0.0), (1.0, 0.0)], [0.0, 2.0],
                                  n_bins=4, max_dist=2.0)
        occupied = np.flatnonzero(emp.counts)
        assert occupied.tolist() == [1]  # distance 1 falls in bin (0.5, 1.0]
        assert emp.gamma_hat[1] == pytest.approx(2.0)  # (2-0)^2 / 2

    def test_identical_values_give_zero(self):
        rng = np.random.default_rng(9)
        pts = rng.uniform(0, 10, size=(12, 2))
        emp = empirical_variogram(pts, np.full(12, 3.3), n_bins=6,
                                  max_dist=15.0)
        assert_allclose(emp.gamma_hat[emp.occupied], 0.0)

    def test_all_pairs_beyond_max_dist(self):
        with pytest.raises(EmptyVariogramError):
            empirical_variogram([(0.0, 0.0), (50.0, 0.0)], [1.0, 2.0],
                                n_bins=5, max_dist=10.0)

    def test_matches_model_curve_on_simulated_fields(self):
        # fields drawn through an in-test matrix square root of the
        # covariance; binned estimates should track nugget + sill(1 - corr)
        rng = np.random.default_rng(10)
        nu, a, sill, nug = 1.5, 0.15, 1.0, 0.2
        pts = rng.uniform(0, 60, size=(50, 2))
        d = np.sqrt(((pts[:, None] - pts[None, :]) ** 2).sum(-1))
        corr = (1 + a * d) * np.exp(-a * d)
        cov = sill * corr + nug * np.eye(50)
        chol = np.linalg.cholesky(cov + 1e-10 * np.eye(50))
        acc = None
        reps = 200
        for _ in range(reps):
            y = chol @ rng.standard_normal(50)
            emp = empirical_variogram(pts, y, n_bins=8, max_dist=40.0)
            acc = emp.gamma_hat if acc is None else acc + emp.gamma_hat
        mean_gamma = acc / reps
        model = model_semivariance(emp.bin_centers, nu, a, sill, nug)
        occ = emp.counts > 30
        assert np.all(np.abs(mean_gamma[occ] - model[occ])
                      < 0.25 * model[occ] + 0.05)


class TestFitVariogram:
    def test_exact_model_recovered(self):
        h = np.linspace(2.0, 40.0, 10)
        gamma = model_semivariance(h, 1.5, 0.2, 2.0, 0.3)
        emp = EmpiricalVariogram(h, gamma, np.full(10, 50))
        sill, nugget = fit_variogram(emp, nu=1.5, inv_range=0.2)
        assert sill == pytest.approx(2.0, abs=1e-6)
        assert nugget == pytest.approx(0.3, abs=1e-6)

    def test_flat_variogram_identifies_total_sill(self):
        # with next-to-no correlation past the first bin only sill + nugget
        # is identified; their sum must match the plateau
        h = np.linspace(1.0, 20.0, 8)
        emp = EmpiricalVariogram(h, np.full(8, 1.7), np.full(8, 40))
        sill, nugget = fit_variogram(emp, nu=0.5, inv_range=10.0)
        assert sill + nugget == pytest.approx(1.7, abs=1e-3)

    def test_needs_two_occupied_bins(self):
        emp = EmpiricalVariogram(np.array([1.0, 2.0]), np.array([1.0, 0.0]),
                                 np.array([10, 0]))
        with pytest.raises(DomainError):
            fit_variogram(emp, nu=1.5, inv_range=0.2)

    def test_monte_carlo_recovery(self):
        rng = np.random.default_rng(12)
        nu, a, true_sill, true_nug = 1.5, 0.2, 1.5, 0.2
        sills, nuggets = [], []
        for _ in range(50):
            pts = rng.uniform(0, 40, size=(200, 2))
            d = np.sqrt(((pts[:, None] - pts[None, :]) ** 2).sum(-1))
            corr = (1 + a * d) * np.exp(-a * d)
            cov = true_sill * corr + true_nug * np.eye(200)
            y = np.linalg.cholesky(cov + 1e-10 * np.eye(200)) \
                @ rng.standard_normal(200)
            emp = empirical_variogram(pts, y, n_bins=14, max_dist=25.0)
            sill, nug = fit_variogram(emp, nu=nu, inv_range=a)
            sills.append(sill)
            nuggets.append(nug)
        assert abs(np.median(sills) - true_sill) < 0.3 * true_sill
        assert abs(np.median(nuggets) - true_nug) < 0.3 * true_nug


def _events(points, values, year=1825):
    frame = GeoFrame(0.0, 0.0, 100.0, 100.0)
    events = []
    for i, ((x, y), v) in enumerate(zip(points, values)):
        lon, lat = frame.unproject(x, y)
        events.append(ConflictEvent(f"e{i}", lon, lat, year, year, int(v)))
    return events, frame


class TestKrigSurface:
    def test_zero_nugget_interpolates_exactly(self):
        rng = np.random.default_rng(13)
        pts = rng.uniform(-20, 20, size=(30, 2))
        vals = rng.choice([5.0, 10.0], size=30)
        model = MaternKriging(nu=1.5, inv_range=0.2, sill=2.0, nugget=0.0)
        model.fit(pts, vals)
        assert np.max(np.abs(model.predict(pts) - vals)) < 1e-6

    def test_far_field_decays_to_zero(self):
        model = MaternKriging(nu=1.5, inv_range=0.2, sill=1.0, nugget=0.0)
        model.fit([(0.0, 0.0)], [10.0])
        far = model.predict([(200.0, 0.0)])
        assert abs(far[0]) < 1e-3 * 1.0

    def test_three_event_grid_matches_dense_solve_oracle(self):
        rng = np.random.default_rng(14)
        nu, a, sill = 1.5, 0.15, 1.4
        pts = np.array([(0.0, 0.0), (12.0, 5.0), (-8.0, 10.0)])
        vals = np.array([10.0, 5.0, 5.0])
        events, frame = _events(pts, vals)
        grid = GridSpec(-30, 30, -25, 25, nx=24, ny=20)
        p = CovarianceParams(nu=nu, inv_range=a, sill=sill, nugget=0.0)
        surf = krig_surface(events, p, grid, 1825, frame)

        # oracle: closed-form covariances and one dense linear solve
        d = np.sqrt(((pts[:, None] - pts[None, :]) ** 2).sum(-1))
        mat = sill * (1 + a * d) * np.exp(-a * d)
        weights = np.linalg.solve(mat, vals)
        centers = grid.cell_centers()
        chosen = rng.integers(0, centers.shape[0], size=100)
        for idx in chosen:
            c = centers[idx]
            dc = np.sqrt(((pts - c) ** 2).sum(-1))
            want = (sill * (1 + a * dc) * np.exp(-a * dc)) @ weights
            assert surf.flat[idx] == pytest.approx(want, abs=1e-8)

    def test_kriging_is_linear_in_observations(self):
        rng = np.random.default_rng(15)
        pts = rng.uniform(-15, 15, size=(8, 2))
        vals = rng.normal(5, 2, size=8)
        grid_pts = rng.uniform(-20, 20, size=(40, 2))
        m1 = MaternKriging(nu=2.5, inv_range=0.3, sill=1.0, nugget=0.1)
        m2 = MaternKriging(nu=2.5, inv_range=0.3, sill=1.0, nugget=0.1)
        pred1 = m1.fit(pts, vals).predict(grid_pts)
        pred3 = m2.fit(pts, 3.0 * vals).predict(grid_pts)
        assert np.max(np.abs(pred3 - 3.0 * pred1)) < 1e-10

    def test_empty_year_raises(self):
        events, frame = _events([(0.0, 0.0)], [10.0], year=1825)
        grid = GridSpec(-10, 10, -10, 10, nx=8, ny=8)
        p = CovarianceParams(nu=1.5, inv_range=0.2, sill=1.0)
        with pytest.raises(EmptyYearError):
            krig_surface(events, p, grid, 1900, frame)

    def test_singular_system_suggests_nugget(self):
        events, frame = _events([(0.0, 0.0), (0.0, 0.0)], [10.0, 5.0])
        grid = GridSpec(-10, 10, -10, 10, nx=8, ny=8)
        p = CovarianceParams(nu=1.5, inv_range=0.2, sill=1.0, nugget=0.0)
        with pytest.raises(NumericalError, match="nugget"):
            krig_surface(events, p, grid, 1825, frame)


class TestNormalizeToPdf:
    def test_constant_surface_becomes_uniform(self, small_grid):
        g = IntensityGrid(small_grid, np.full(small_grid.n_cells, 4.0),
                          "intensity")
        pdf = normalize_to_pdf(g)
        area = (small_grid.x_max - small_grid.x_min) \
            * (small_grid.y_max - small_grid.y_min)
        assert_allclose(pdf.values, 1.0 / area)

    def test_single_positive_cell(self, small_grid):
        values = np.zeros(small_grid.n_cells)
        values[137] = 2.5
        pdf = normalize_to_pdf(IntensityGrid(small_grid, values, "intensity"))
        assert pdf.flat[137] == pytest.approx(1.0 / small_grid.cell_area)
        assert pdf.flat.sum() * small_grid.cell_area == pytest.approx(1.0)

    def test_negatives_clamped(self, small_grid):
        rng = np.random.default_rng(16)
        values = rng.normal(0.2, 1.0, small_grid.n_cells)
        pdf = normalize_to_pdf(IntensityGrid(small_grid, values, "intensity"))
        assert np.all(pdf.values >= 0)
        assert pdf.flat.sum() * small_grid.cell_area == pytest.approx(
            1.0, abs=1e-6)

    def test_all_nonpositive_rejected(self, small_grid):
        g = IntensityGrid(small_grid, np.full(small_grid.n_cells, -1.0),
                          "intensity")
        with pytest.raises(NormalizationError):
            normalize_to_pdf(g)

    def test_fixture_year_surface_integrates_to_one(self, data):
        from originsim.simulate import default_grid
        p = CovarianceParams(nu=5.0, inv_range=0.1, sill=1.0, nugget=0.0)
        grid = default_grid(data, nx=96, ny=72)
        surf = krig_surface(data.conflicts, p, grid, 1828, data.frame)
        pdf = normalize_to_pdf(surf)
        riemann = float(pdf.flat.sum()) * grid.cell_area
        assert riemann == pytest.approx(1.0, abs=1e-6)


class TestSampleOrigins:
    def _delta_pdf(self, grid, cell):
        values = np.zeros(grid.n_cells)
        values[cell] = 1.0 / grid.cell_area
        return IntensityGrid(grid, values, "pdf")

    def test_point_mass_stays_in_cell(self, small_grid):
        cell = 321
        pdf = self._delta_pdf(small_grid, cell)
        pts = sample_origins(pdf, 500, seed=1)
        iy, ix = divmod(cell, small_grid.nx)
        x0 = small_grid.x_min + ix * small_grid.dx
        y0 = small_grid.y_min + iy * small_grid.dy
        assert np.all((pts[:, 0] >= x0) & (pts[:, 0] <= x0 + small_grid.dx))
        assert np.all((pts[:, 1] >= y0) & (pts[:, 1] <= y0 + small_grid.dy))

    def test_same_seed_identical(self, small_grid):
        pdf = self._delta_pdf(small_grid, 10)
        a = sample_origins(pdf, 100, seed=99)
        b = sample_origins(pdf, 100, seed=99)
        assert np.array_equal(a, b)

    def test_uniform_frequencies_pass_chi2(self):
        grid = GridSpec(0, 10, 0, 8, nx=10, ny=8)
        pdf = IntensityGrid(grid, np.full(grid.n_cells, 1.0 / 80.0), "pdf")
        pts = sample_origins(pdf, 100_000, seed=3)
        ix = ((pts[:, 0] - grid.x_min) / grid.dx).astype(int)
        iy = ((pts[:, 1] - grid.y_min) / grid.dy).astype(int)
        counts = np.bincount(iy * grid.nx + ix, minlength=80)
        expected = 100_000 / 80.0
        stat = float(((counts - expected) ** 2 / expected).sum())
        assert stat < stats.chi2.ppf(0.999, df=79)

    def test_cell_frequencies_track_masses(self):
        rng = np.random.default_rng(17)
        grid = GridSpec(0, 12, 0, 9, nx=12, ny=9)
        raw = rng.random(grid.n_cells) ** 2
        pdf = normalize_to_pdf(IntensityGrid(grid, raw, "intensity"))
        pts = sample_origins(pdf, 100_000, seed=4)
        ix = np.clip(((pts[:, 0] - grid.x_min) / grid.dx).astype(int),
                     0, grid.nx - 1)
        iy = np.clip(((pts[:, 1] - grid.y_min) / grid.dy).astype(int),
                     0, grid.ny - 1)
        counts = np.bincount(iy * grid.nx + ix, minlength=grid.n_cells)
        expected = pdf.cell_masses() * 100_000
        keep = expected >= 5
        stat = float(((counts[keep] - expected[keep]) ** 2
                      / expected[keep]).sum())
        # absorb the pooled tail into a single remainder category
        if np.any(~keep):
            rest_o = counts[~keep].sum()
            rest_e = expected[~keep].sum()
            if rest_e > 0:
                stat += (rest_o - rest_e) ** 2 / rest_e
        df = int(keep.sum()) - 1 + (1 if np.any(~keep) else 0)
        assert stat < stats.chi2.ppf(0.999, df=df)

    def test_requires_pdf_kind(self, small_grid):
        g = IntensityGrid(small_grid, np.full(small_grid.n_cells, 1.0),
                          "intensity")
        with pytest.raises(DomainError):
            sample_origins(g, 10, seed=0)


class TestEstimatorApi:
    def test_get_set_params_roundtrip(self):
        from sklearn.base import clone
        m = MaternKriging(nu=2.5, inv_range=0.4, sill=1.1, nugget=0.05)
        params = m.get_params()
        assert params == {"nu": 2.5, "inv_range": 0.4, "sill": 1.1,
                          "nugget": 0.05}
        m2 = clone(m).set_params(sill=2.2)
        assert m2.get_params()["sill"] == 2.2

    def test_predict_before_fit_fails(self):
        from sklearn.exceptions import NotFittedError
        with pytest.raises(NotFittedError):
            MaternKriging().predict([(0.0, 0.0)])
