"""Deterministic synthetic datasets with the production file schemas.

The historical tables behind the model are not redistributable, so the repo
ships (and can regenerate) a synthetic Bight-of-Benin-flavoured stand-in:
40 cities with plausible coordinates, a connected trade network, drifting
annual conflict clusters for 1816-1836, port totals, ship ledgers, and four
rectangular regions. 1828 carries exactly 30 active conflicts so the
variogram/kriging fit year has a stable size.

Everything here is generated from fixed seeds; rerunning the writer yields
byte-identical files.
"""

from __future__ import annotations

import argparse
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import minimum_spanning_tree

from .geodata import (
    CitySite,
    ConflictEvent,
    Dataset,
    FILE_NAMES,
    PortRecord,
    RegionPolygon,
    ShipLedger,
    TradeEdge,
    serialize_dataset,
)

YEARS = range(1816, 1837)
FIT_YEAR = 1828
_SEED = 1787

_SALE_CITIES = [
    ("Lagos", 3.39, 6.45, "sale_atlantic"),
    ("Porto Novo", 2.63, 6.50, "sale_atlantic"),
    ("Ouidah", 2.08, 6.36, "sale_atlantic"),
    ("Abomey", 1.99, 7.18, "sale_coastal"),
    ("Benin City", 5.62, 6.34, "sale_coastal"),
    ("Djougou", 1.67, 9.71, "sale_saharan"),
    ("Kalama", 3.09, 9.61, "sale_saharan"),
    ("Bussa", 4.51, 10.19, "sale_saharan"),
    ("Ogudu", 4.35, 9.75, "sale_saharan"),
    ("Tsaragi", 4.90, 8.71, "sale_saharan"),
    ("Ogodo", 4.18, 9.25, "sale_saharan"),
]

# (name, lon, lat, exist_from, exist_to); founding/destruction years keep a
# few cities out of parts of the study period
_INTERIOR_CITIES = [
    ("Ibadan", 3.90, 7.38, 1829, 1900),
    ("Abeokuta", 3.35, 7.15, 1830, 1900),
    ("Oyo-Ile", 4.33, 8.25, 1700, 1835),
    ("Ilorin", 4.55, 8.50, 1700, 1900),
    ("Ogbomosho", 4.27, 8.13, 1700, 1900),
    ("Iseyin", 3.60, 7.97, 1700, 1900),
    ("Saki", 3.39, 8.67, 1700, 1900),
    ("Kishi", 3.85, 9.08, 1700, 1900),
    ("Igboho", 3.75, 8.84, 1700, 1900),
    ("Ijaye", 3.83, 7.61, 1700, 1900),
    ("Ede", 4.44, 7.73, 1700, 1900),
    ("Osogbo", 4.57, 7.77, 1700, 1900),
    ("Ilesa", 4.74, 7.62, 1700, 1900),
    ("Ife", 4.56, 7.47, 1700, 1900),
    ("Ondo", 4.84, 7.09, 1700, 1900),
    ("Ijebu-Ode", 3.92, 6.82, 1700, 1900),
    ("Owu", 3.48, 7.25, 1700, 1822),
    ("Ilaro", 3.01, 6.89, 1700, 1900),
    ("Ketu", 2.60, 7.36, 1700, 1900),
    ("Sabe", 2.65, 8.03, 1700, 1900),
    ("Dassa", 2.18, 7.75, 1700, 1900),
    ("Parakou", 2.63, 9.34, 1700, 1900),
    ("Nikki", 3.21, 9.94, 1700, 1900),
    ("Wawa", 4.43, 9.90, 1700, 1900),
    ("Badagry", 2.88, 6.42, 1700, 1900),
    ("Epe", 3.98, 6.58, 1700, 1900),
    ("Iwo", 4.18, 7.63, 1700, 1900),
    ("Ikirun", 4.67, 7.91, 1700, 1900),
    ("Tchaourou", 2.60, 8.87, 1700, 1900),
]


def fixture_cities() -> list[CitySite]:
    cities = [CitySite(name, lon, lat, 1700, 1900, role)
              for name, lon, lat, role in _SALE_CITIES]
    cities += [CitySite(name, lon, lat, y0, y1)
               for name, lon, lat, y0, y1 in _INTERIOR_CITIES]
    return cities


def _km_coords(cities) -> np.ndarray:
    # rough local km frame just for distance-based edge construction
    lat0 = float(np.mean([c.lat for c in cities]))
    kx = 111.320 * np.cos(np.radians(lat0))
    return np.array([[c.lon * kx, c.lat * 110.574] for c in cities])


def fixture_edges(cities: list[CitySite] | None = None) -> list[TradeEdge]:
    """k-nearest-neighbour + spanning-tree edges, patched so that in every
    study year all active cities reach a point-of-sale."""
    cities = cities or fixture_cities()
    coords = _km_coords(cities)
    n = len(cities)
    d = np.sqrt(((coords[:, None, :] - coords[None, :, :]) ** 2).sum(-1))

    pairs: set[tuple[int, int]] = set()

    def add(i: int, j: int):
        if i != j:
            pairs.add((min(i, j), max(i, j)))

    for i in range(n):
        for j in np.argsort(d[i])[1:4]:
            add(i, int(j))
    mst = minimum_spanning_tree(d).tocoo()
    for i, j in zip(mst.row, mst.col):
        add(int(i), int(j))

    index = {c.name: i for i, c in enumerate(cities)}
    for a, b in [("Ouidah", "Porto Novo"), ("Porto Novo", "Badagry"),
                 ("Porto Novo", "Lagos"), ("Badagry", "Lagos"),
                 ("Lagos", "Epe"), ("Abomey", "Ouidah")]:
        add(index[a], index[b])

    # patch per-year gaps left by cities that do not exist the whole period
    for year in YEARS:
        while True:
            active = [i for i in range(n) if cities[i].active(year)]
            sub = {i for i in active}
            reach = {i for i in active if cities[i].is_sale}
            frontier = list(reach)
            adj: dict[int, list[int]] = {i: [] for i in active}
            for i, j in pairs:
                if i in sub and j in sub:
                    adj[i].append(j)
                    adj[j].append(i)
            while frontier:
                v = frontier.pop()
                for u in adj[v]:
                    if u not in reach:
                        reach.add(u)
                        frontier.append(u)
            stranded = [i for i in active if i not in reach]
            if not stranded:
                break
            i = min(stranded)
            reachable = sorted(reach, key=lambda j: d[i, j])
            add(i, reachable[0])

    edges = [TradeEdge(cities[i].name, cities[j].name, directed=False)
             for i, j in sorted(pairs)]
    return edges


def fixture_conflicts() -> list[ConflictEvent]:
    """Annual conflict clusters drifting south-east across the region.

    All events are single-year except a fixed handful of multi-year spans
    kept away from the fit year, so 1828 holds exactly 30 active events.
    """
    rng = np.random.default_rng(_SEED)
    events: list[ConflictEvent] = []
    for year in YEARS:
        t = year - YEARS.start
        center_lon = 2.4 + 0.1 * t
        center_lat = 8.3 - 0.07 * t
        n_events = 30 if year == FIT_YEAR else int(4 + rng.integers(0, 5))
        for k in range(n_events):
            lon = float(np.clip(center_lon + rng.normal(0.0, 0.45), 1.2, 5.9))
            lat = float(np.clip(center_lat + rng.normal(0.0, 0.40), 6.1, 10.4))
            intensity = int(rng.choice([5, 10], p=[0.65, 0.35]))
            events.append(ConflictEvent(
                id=f"c{year}_{k:02d}", lon=lon, lat=lat,
                start_year=year, end_year=year, intensity=intensity))
    # multi-year sieges, outside the fit year
    events.append(ConflictEvent("siege_owu", 3.48, 7.25, 1820, 1822, 10))
    events.append(ConflictEvent("siege_sabe", 2.65, 8.03, 1817, 1819, 5))
    events.append(ConflictEvent("raid_border", 2.30, 8.60, 1830, 1833, 5))
    # founded / rebuilt rows are parsed but never modeled
    events.append(ConflictEvent("founded_ibadan", 3.90, 7.38, 1829, 1829, 0))
    events.append(ConflictEvent("founded_abeokuta", 3.35, 7.15, 1830, 1830, 0))
    events.append(ConflictEvent("rebuilt_saki", 3.39, 8.67, 1824, 1824, 1))
    return events


def fixture_ports() -> list[PortRecord]:
    rng = np.random.default_rng(_SEED + 1)
    records = []
    base = {"Lagos": 2400.0, "Porto Novo": 1500.0, "Ouidah": 1900.0}
    for year in YEARS:
        t = year - YEARS.start
        for port, level in base.items():
            drift = 1.0 + 0.02 * t if port == "Lagos" else 1.0 - 0.01 * t
            count = int(max(rng.normal(level * drift, level * 0.15), 50.0))
            records.append(PortRecord(year=year, port=port, count=count))
        if year % 3 != 0:
            records.append(PortRecord(
                year=year, port="UNKNOWN",
                count=int(rng.integers(100, 900))))
    return records


def fixture_ledgers() -> list[ShipLedger]:
    return [
        ShipLedger("Esperanza", 1825, "Lagos",
                   {"coastal_east": 58, "upland_east": 27,
                    "coastal_west": 9, "upland_west": 6}),
        ShipLedger("Dois Amigos", 1825, "Ouidah",
                   {"coastal_west": 64, "upland_west": 22,
                    "coastal_east": 8, "upland_east": 6}),
        ShipLedger("Aurora", 1832, "Lagos",
                   {"coastal_east": 71, "upland_east": 35,
                    "coastal_west": 12, "upland_west": 4}),
        ShipLedger("Vigilante", 1832, "Ouidah",
                   {"coastal_west": 49, "upland_west": 31,
                    "coastal_east": 11, "upland_east": 3}),
    ]


def fixture_regions() -> list[RegionPolygon]:
    def rect(name, lon0, lon1, lat0, lat1):
        return RegionPolygon(name, YEARS.start, YEARS.stop - 1, (
            (lon0, lat0), (lon1, lat0), (lon1, lat1), (lon0, lat1),
            (lon0, lat0)))

    return [
        rect("coastal_west", 0.5, 3.1, 5.5, 7.5),
        rect("coastal_east", 3.1, 6.8, 5.5, 7.5),
        rect("upland_west", 0.5, 3.1, 7.5, 11.0),
        rect("upland_east", 3.1, 6.8, 7.5, 11.0),
    ]


@lru_cache(maxsize=1)
def fixture_dataset() -> Dataset:
    """The full synthetic dataset, assembled in memory."""
    cities = fixture_cities()
    return Dataset.from_records(
        conflicts=fixture_conflicts(),
        cities=cities,
        edges=fixture_edges(cities),
        ports=fixture_ports(),
        ledgers=fixture_ledgers(),
        regions=fixture_regions(),
    )


def toy_two_route_dataset(conflict_on_short: bool) -> Dataset:
    """Five cities, a short route and a detour, one optional conflict.

    The start S3 can reach the sale city S1 either directly through S2
    (about 33 km) or around through D1/D2 (about 54 km). A single intense
    conflict sits on S2 when requested.
    """
    cities = [
        CitySite("S1", 0.30, 7.00, 1700, 1900, "sale_atlantic"),
        CitySite("S2", 0.15, 7.00, 1700, 1900),
        CitySite("S3", 0.00, 7.00, 1700, 1900),
        CitySite("D1", 0.075, 7.15, 1700, 1900),
        CitySite("D2", 0.225, 7.15, 1700, 1900),
    ]
    edges = [
        TradeEdge("S3", "S2"), TradeEdge("S2", "S1"),
        TradeEdge("S3", "D1"), TradeEdge("D1", "D2"), TradeEdge("D2", "S1"),
    ]
    conflicts = [ConflictEvent("quiet", -1.0, 8.0, 1700, 1700, 5)]
    if conflict_on_short:
        conflicts.append(
            ConflictEvent("warzone", 0.15, 7.00, 1825, 1825, 10))
    return Dataset.from_records(conflicts=conflicts, cities=cities,
                                edges=edges)


def write_fixture(out_dir) -> list[Path]:
    """Write all six files; byte-identical on every run."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = {
        "conflicts": fixture_conflicts(),
        "cities": fixture_cities(),
        "edges": fixture_edges(),
        "ports": fixture_ports(),
        "ledgers": fixture_ledgers(),
        "regions": fixture_regions(),
    }
    written = []
    for kind, records in data.items():
        path = out / FILE_NAMES[kind]
        path.write_bytes(serialize_dataset(kind, records))
        written.append(path)
    return written


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="regenerate the synthetic fixture data directory")
    parser.add_argument("--out", default="data/fixture")
    args = parser.parse_args(argv)
    for path in write_fixture(args.out):
        print(path)


if __name__ == "__main__":
    main()
