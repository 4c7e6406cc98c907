"""Read-only JSON API over exported per-year bundles.

Conditional origin surfaces are computed on demand from the stored
simulation points and cached by (year, ports, bandwidth); everything else
is served straight from the validated in-memory bundle store. The store is
immutable after startup, so concurrent requests need no further locking
beyond the response cache.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.middleware.cors import CORSMiddleware

from .contours import contour_layer
from .errors import DataError, EmptySelectionError
from .grids import IntensityGrid
from .kde import KdeSpec, conditional_map
from .simulate import captives_from_csv

H_MIN, H_MAX = 0.5, 2.0

LAYER_KINDS = ("conflicts", "intensity", "contours", "network", "policy",
               "borders")

_BUNDLE_FILES = ("conflicts.json", "intensity.json", "pdf.json",
                 "simulation.csv", "network.json", "policy.json",
                 "regions.json")


@dataclass(frozen=True)
class YearBundle:
    year: int
    conflicts: list
    intensity: IntensityGrid
    pdf: IntensityGrid
    captives: tuple
    network: dict
    policy: dict
    regions: list
    ports: tuple[str, ...]


class BundleStore:
    """All year bundles of one export directory, loaded and validated."""

    def __init__(self, root: Path):
        self.root = Path(root)
        if not self.root.is_dir():
            raise DataError(f"bundle directory {self.root} does not exist")
        meta_path = self.root / "meta.json"
        self.meta = (json.loads(meta_path.read_text(encoding="utf-8"))
                     if meta_path.exists() else {})
        self.years: dict[int, YearBundle] = {}
        for child in sorted(self.root.iterdir()):
            if child.is_dir() and child.name.isdigit():
                self.years[int(child.name)] = self._load_year(child)

    def _load_year(self, path: Path) -> YearBundle:
        for fname in _BUNDLE_FILES:
            if not (path / fname).exists():
                raise DataError(f"bundle {path} is missing {fname}")
        read = lambda name: (path / name).read_text(encoding="utf-8")
        captives = tuple(captives_from_csv(read("simulation.csv")))
        network = json.loads(read("network.json"))
        ports = tuple(sorted({c.sale for c in captives
                              if c.sale != "UNRESOLVED"}))
        return YearBundle(
            year=int(path.name),
            conflicts=json.loads(read("conflicts.json")),
            intensity=IntensityGrid.from_json(read("intensity.json")),
            pdf=IntensityGrid.from_json(read("pdf.json")),
            captives=captives,
            network=network,
            policy=json.loads(read("policy.json")),
            regions=json.loads(read("regions.json")),
            ports=ports,
        )

    def bundle(self, year: int) -> YearBundle:
        if year not in self.years:
            raise KeyError(year)
        return self.years[year]


def create_app(bundle_root, ui_dir=None) -> FastAPI:
    store = BundleStore(Path(bundle_root))
    app = FastAPI(title="originsim", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["GET"],
        allow_headers=["*"])
    cache: dict[tuple, bytes] = {}
    cache_lock = threading.Lock()

    def _bundle_or_404(year: int) -> YearBundle:
        try:
            return store.bundle(year)
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"unknown year {year}") from None

    @app.get("/api/years")
    def get_years():
        return sorted(store.years)

    @app.get("/api/meta")
    def get_meta():
        return {
            "years": sorted(store.years),
            "ports": {str(y): list(b.ports)
                      for y, b in sorted(store.years.items())},
            "bandwidth_km": {"min": H_MIN, "max": H_MAX},
            "units": {
                "grid": "km in the planar frame described by `frame`",
                "coordinates": "decimal degrees (lon, lat)",
                "surface": "probability density per square km",
            },
            **store.meta,
        }

    @app.get("/api/surface")
    def get_surface(year: int, ports: str = Query(...),
                    h: float = Query(1.0)):
        bundle = _bundle_or_404(year)
        wanted = tuple(sorted({p for p in ports.split(",") if p}))
        if not wanted:
            raise HTTPException(status_code=422,
                                detail="no ports selected")
        if not (H_MIN <= h <= H_MAX):
            raise HTTPException(
                status_code=422,
                detail=f"h must lie in [{H_MIN}, {H_MAX}] km")
        key = (year, wanted, float(h))
        with cache_lock:
            cached = cache.get(key)
        if cached is None:
            try:
                grid = conditional_map(bundle.captives, set(wanted),
                                       KdeSpec(h, bundle.pdf.spec))
            except EmptySelectionError as exc:
                raise HTTPException(status_code=409,
                                    detail=str(exc)) from None
            cached = grid.to_json().encode("utf-8")
            with cache_lock:
                cache.setdefault(key, cached)
        return Response(content=cached, media_type="application/json")

    @app.get("/api/layer")
    def get_layer(year: int, kind: str):
        bundle = _bundle_or_404(year)
        if kind == "conflicts":
            return bundle.conflicts
        if kind == "intensity":
            return bundle.intensity.to_json_dict()
        if kind == "contours":
            return contour_layer(bundle.intensity)
        if kind == "network":
            return bundle.network
        if kind == "policy":
            return bundle.policy
        if kind == "borders":
            return bundle.regions
        raise HTTPException(status_code=404,
                            detail=f"unknown layer kind {kind!r}")

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True),
                  name="ui")
    return app
