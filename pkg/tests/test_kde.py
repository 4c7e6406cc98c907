import numpy as np
import pytest
from numpy.testing import assert_allclose

from originsim.errors import DomainError, EmptySelectionError
from originsim.grids import GridSpec
from originsim.kde import GaussianHeatmap, KdeSpec, conditional_map, kde2d
from originsim.simulate import CaptiveRecord


def _captive(i, point, sale):
    return CaptiveRecord(captive_id=i, capture_point=tuple(point),
                         entry_node="X", path=("X",), sale=sale,
                         reward_draw=(1.0,))


class TestKde2d:
    def test_single_point_peaks_at_its_cell(self, small_grid):
        spec = KdeSpec(1.5, small_grid)
        g = kde2d([(0.5, 0.5)], spec)  # a cell center of the 40x30 grid
        peak = np.unravel_index(np.argmax(g.values), g.values.shape)
        xs, ys = small_grid.x_centers(), small_grid.y_centers()
        assert xs[peak[1]] == pytest.approx(0.5)
        assert ys[peak[0]] == pytest.approx(0.5)

    def test_single_point_is_radially_symmetric(self):
        grid = GridSpec(-10, 10, -10, 10, nx=20, ny=20)
        g = kde2d([(0.0, 0.0)], KdeSpec(2.0, grid))
        # grid is symmetric about the origin, so the surface must be too
        assert_allclose(g.values, g.values[::-1, :], rtol=1e-12)
        assert_allclose(g.values, g.values[:, ::-1], rtol=1e-12)
        assert_allclose(g.values, g.values.T, rtol=1e-12)

    def test_coincident_points_match_single_point(self, small_grid):
        spec = KdeSpec(1.0, small_grid)
        one = kde2d([(2.0, -1.0)], spec)
        many = kde2d([(2.0, -1.0)] * 7, spec)
        assert_allclose(many.values, one.values, rtol=1e-12)

    def test_integrates_to_one_and_nonnegative(self, small_grid):
        rng = np.random.default_rng(30)
        for _ in range(20):
            pts = rng.uniform([-15, -10], [15, 10],
                              size=(int(rng.integers(1, 60)), 2))
            h = float(rng.uniform(0.5, 2.0))
            g = kde2d(pts, KdeSpec(h, small_grid))
            assert np.all(g.values >= 0)
            integral = float(g.flat.sum()) * small_grid.cell_area
            assert integral == pytest.approx(1.0, abs=1e-6)

    def test_gaussian_sample_peak_near_true_mean(self):
        rng = np.random.default_rng(31)
        grid = GridSpec(-12, 12, -12, 12, nx=48, ny=48)
        pts = rng.normal([1.5, -2.0], 2.0, size=(500, 2))
        g = kde2d(pts, KdeSpec(1.0, grid))
        iy, ix = np.unravel_index(np.argmax(g.values), g.values.shape)
        xs, ys = grid.x_centers(), grid.y_centers()
        assert abs(xs[ix] - 1.5) <= 3 * grid.dx
        assert abs(ys[iy] + 2.0) <= 3 * grid.dy

    def test_translation_equivariance(self):
        rng = np.random.default_rng(32)
        grid = GridSpec(-20, 20, -20, 20, nx=40, ny=40)
        pts = rng.uniform(-6, 6, size=(40, 2))
        shift = np.array([3.0, -2.0])  # whole cells: dx = dy = 1
        a = kde2d(pts, KdeSpec(1.0, grid))
        b = kde2d(pts + shift, KdeSpec(1.0, grid))
        ia = np.unravel_index(np.argmax(a.values), a.values.shape)
        ib = np.unravel_index(np.argmax(b.values), b.values.shape)
        assert abs(ib[1] - (ia[1] + 3)) <= 1
        assert abs(ib[0] - (ia[0] - 2)) <= 1

    def test_bandwidth_smooths_monotonically(self, small_grid):
        rng = np.random.default_rng(33)
        pts = rng.uniform([-10, -8], [10, 8], size=(50, 2))
        maxima = [kde2d(pts, KdeSpec(h, small_grid)).values.max()
                  for h in (0.5, 1.0, 2.0)]
        assert maxima[0] >= maxima[1] >= maxima[2]

    def test_empty_input_rejected(self, small_grid):
        with pytest.raises(DomainError):
            kde2d(np.empty((0, 2)), KdeSpec(1.0, small_grid))

    def test_bad_bandwidth_rejected(self, small_grid):
        with pytest.raises(DomainError):
            KdeSpec(0.0, small_grid)


class TestConditionalMap:
    def _records(self):
        rng = np.random.default_rng(34)
        sales = ["Lagos"] * 30 + ["Ouidah"] * 20 + ["Bussa"] * 10
        rng.shuffle(sales)
        pts = rng.uniform([-15, -10], [15, 10], size=(60, 2))
        return [_captive(i, p, s) for i, (p, s) in enumerate(zip(pts, sales))]

    def test_single_port_equals_kde_of_all_when_all_match(self, small_grid):
        rng = np.random.default_rng(35)
        pts = rng.uniform([-10, -8], [10, 8], size=(25, 2))
        recs = [_captive(i, p, "Lagos") for i, p in enumerate(pts)]
        spec = KdeSpec(1.0, small_grid)
        cond = conditional_map(recs, {"Lagos"}, spec)
        direct = kde2d(pts, spec)
        assert np.array_equal(cond.values, direct.values)

    def test_empty_selection_is_distinct_error(self, small_grid):
        recs = self._records()
        with pytest.raises(EmptySelectionError):
            conditional_map(recs, {"Abomey"}, KdeSpec(1.0, small_grid))
        with pytest.raises(EmptySelectionError):
            conditional_map(recs, set(), KdeSpec(1.0, small_grid))
        with pytest.raises(DomainError):
            conditional_map([], {"Lagos"}, KdeSpec(1.0, small_grid))

    def test_union_matches_explicit_filter_oracle(self, small_grid):
        recs = self._records()
        spec = KdeSpec(1.0, small_grid)
        union = conditional_map(recs, {"Lagos", "Bussa"}, spec)
        pts = np.array([r.capture_point for r in recs
                        if r.sale in ("Lagos", "Bussa")])
        assert_allclose(union.values, kde2d(pts, spec).values, rtol=1e-12)

    def test_all_ports_equals_unconditional_exactly(self, small_grid):
        recs = self._records()
        spec = KdeSpec(1.0, small_grid)
        cond = conditional_map(recs, {"Lagos", "Ouidah", "Bussa"}, spec)
        every = kde2d(np.array([r.capture_point for r in recs]), spec)
        assert np.array_equal(cond.values, every.values)

    def test_krig_variant_is_a_density(self, small_grid):
        recs = self._records()
        g = conditional_map(recs, {"Lagos"}, KdeSpec(2.0, small_grid),
                            method="krig")
        assert g.kind == "kde"
        assert float(g.flat.sum()) * small_grid.cell_area == pytest.approx(
            1.0, abs=1e-6)


class TestHeatmapEstimator:
    def test_fit_then_grid(self, small_grid):
        rng = np.random.default_rng(36)
        pts = rng.uniform(-5, 5, size=(30, 2))
        est = GaussianHeatmap(bandwidth_km=1.0).fit(pts)
        g = est.grid_density(small_grid)
        direct = kde2d(pts, KdeSpec(1.0, small_grid))
        assert np.array_equal(g.values, direct.values)

    def test_params_roundtrip(self):
        est = GaussianHeatmap(bandwidth_km=1.7)
        assert est.get_params() == {"bandwidth_km": 1.7}
