import json

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from originsim.cli import main as cli_main
from originsim.fixtures import write_fixture
from originsim.grids import IntensityGrid
from originsim.kde import KdeSpec, conditional_map
from originsim.server import create_app
from originsim.simulate import captives_from_csv


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    """Fixture data run through krig + simulate + export-bundle once."""
    root = tmp_path_factory.mktemp("bundle_run")
    data_dir = root / "data"
    out_dir = root / "out"
    write_fixture(data_dir)
    config = root / "config.yaml"
    config.write_text(
        "n_captives: 400\n"
        "grid: {nx: 96, ny: 72}\n"
        "covariance: {sill: 1.0, nugget: 0.0}\n",
        encoding="utf-8")
    runner = CliRunner()
    for year in (1824, 1825, 1826):
        args = ["--data-dir", str(data_dir), "--out", str(out_dir),
                "--config", str(config), "--quiet"]
        assert runner.invoke(cli_main, args + ["krig", "--year",
                                               str(year)]).exit_code == 0
    args = ["--data-dir", str(data_dir), "--out", str(out_dir),
            "--config", str(config), "--quiet"]
    assert runner.invoke(
        cli_main, args + ["simulate", "--years", "1824-1826"]).exit_code == 0
    assert runner.invoke(
        cli_main, args + ["export-bundle", "--years",
                          "1824-1826"]).exit_code == 0
    return out_dir / "bundle"


@pytest.fixture(scope="module")
def client(bundle):
    return TestClient(create_app(bundle))


class TestYears:
    def test_lists_exported_years(self, client, bundle):
        got = client.get("/api/years").json()
        assert got == [1824, 1825, 1826]
        on_disk = sorted(int(p.name) for p in bundle.iterdir()
                         if p.is_dir() and p.name.isdigit())
        assert got == on_disk

    def test_empty_store(self, tmp_path):
        empty_client = TestClient(create_app(tmp_path))
        assert empty_client.get("/api/years").json() == []


class TestSurface:
    def test_all_ports_equals_unconditional_kde(self, client, bundle):
        sim = (bundle / "1825" / "simulation.csv").read_text()
        captives = captives_from_csv(sim)
        ports = sorted({c.sale for c in captives if c.sale != "UNRESOLVED"})
        resp = client.get("/api/surface", params={
            "year": 1825, "ports": ",".join(ports), "h": 1.0})
        assert resp.status_code == 200
        got = IntensityGrid.from_json_dict(resp.json())
        pdf = IntensityGrid.from_json(
            (bundle / "1825" / "pdf.json").read_text())
        want = conditional_map(captives, set(ports), KdeSpec(1.0, pdf.spec))
        assert np.array_equal(got.values, want.values)

    def test_out_of_range_bandwidth_is_422(self, client):
        resp = client.get("/api/surface", params={
            "year": 1825, "ports": "Lagos", "h": 3.0})
        assert resp.status_code == 422
        resp = client.get("/api/surface", params={
            "year": 1825, "ports": "Lagos", "h": 0.25})
        assert resp.status_code == 422

    def test_empty_port_selection_is_422(self, client):
        resp = client.get("/api/surface", params={
            "year": 1825, "ports": "", "h": 1.0})
        assert resp.status_code == 422

    def test_unknown_year_is_404(self, client):
        resp = client.get("/api/surface", params={
            "year": 1790, "ports": "Lagos", "h": 1.0})
        assert resp.status_code == 404

    def test_unmatched_selection_is_409(self, client, bundle):
        sim = (bundle / "1825" / "simulation.csv").read_text()
        captives = captives_from_csv(sim)
        sold = {c.sale for c in captives}
        quiet_port = next(p for p in ("Benin City", "Djougou", "Bussa",
                                      "Lagos") if p not in sold)
        resp = client.get("/api/surface", params={
            "year": 1825, "ports": quiet_port, "h": 1.0})
        assert resp.status_code == 409

    def test_repeated_request_is_byte_identical(self, client):
        params = {"year": 1825, "ports": "Abomey,Tsaragi", "h": 1.5}
        a = client.get("/api/surface", params=params)
        b = client.get("/api/surface", params=params)
        assert a.status_code == b.status_code == 200
        assert a.content == b.content

    def test_port_order_does_not_matter(self, client):
        a = client.get("/api/surface", params={
            "year": 1825, "ports": "Abomey,Tsaragi", "h": 1.0})
        b = client.get("/api/surface", params={
            "year": 1825, "ports": "Tsaragi,Abomey", "h": 1.0})
        assert a.content == b.content


class TestLayers:
    def test_conflicts_layer_matches_bundle(self, client, bundle):
        resp = client.get("/api/layer", params={"year": 1825,
                                                "kind": "conflicts"})
        assert resp.status_code == 200
        want = json.loads((bundle / "1825" / "conflicts.json").read_text())
        assert resp.json() == want

    def test_network_layer_counts_active_cities(self, client, data):
        resp = client.get("/api/layer", params={"year": 1825,
                                                "kind": "network"})
        nodes = resp.json()["nodes"]
        active = [c for c in data.cities if c.active(1825)]
        assert len(nodes) == len(active)

    def test_contours_on_real_surface(self, client):
        resp = client.get("/api/layer", params={"year": 1825,
                                                "kind": "contours"})
        layer = resp.json()
        assert len(layer) == 10
        assert all("level" in entry and "lines" in entry for entry in layer)

    def test_policy_layer_round_trips(self, client, bundle):
        resp = client.get("/api/layer", params={"year": 1824,
                                                "kind": "policy"})
        want = json.loads((bundle / "1824" / "policy.json").read_text())
        assert resp.json() == want

    def test_borders_layer(self, client):
        resp = client.get("/api/layer", params={"year": 1825,
                                                "kind": "borders"})
        regions = resp.json()
        assert {r["region"] for r in regions} == {
            "coastal_west", "coastal_east", "upland_west", "upland_east"}

    def test_unknown_layer_is_404(self, client):
        resp = client.get("/api/layer", params={"year": 1825,
                                                "kind": "treasure"})
        assert resp.status_code == 404

    def test_unknown_year_is_404(self, client):
        resp = client.get("/api/layer", params={"year": 1700,
                                                "kind": "conflicts"})
        assert resp.status_code == 404


class TestMeta:
    def test_meta_documents_units_and_frame(self, client):
        meta = client.get("/api/meta").json()
        assert meta["years"] == [1824, 1825, 1826]
        assert "units" in meta and "grid" in meta["units"]
        assert "frame" in meta
        assert meta["bandwidth_km"] == {"min": 0.5, "max": 2.0}
        assert "1825" in meta["ports"]
