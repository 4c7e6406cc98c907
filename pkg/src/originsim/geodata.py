"""Dataset ingestion, planar projection, and region membership.

Input files are plain CSV/JSON with fixed headers (see ``FILE_NAMES``).
All loaded records are immutable dataclasses; a :class:`Dataset` bundles the
six files of one data directory and cross-validates references between them.

Coordinates in the files are decimal degrees. Modeling happens in a local
planar frame (:class:`GeoFrame`) measured in km, built by equirectangular
projection about the dataset centroid; the study region spans only a few
degrees, so distortion is negligible and Euclidean distances are meaningful.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    DomainError,
    ParseError,
    ReferentialError,
    SchemaError,
)

VALID_INTENSITIES = (0, 1, 5, 10)
#: intensity codes that enter the conflict model; founded (0) and rebuilt (1)
#: rows are parsed but never modeled
MODELED_INTENSITIES = (5, 10)

ROLES = ("interior", "sale_atlantic", "sale_coastal", "sale_saharan")
SALE_ROLES = ("sale_atlantic", "sale_coastal", "sale_saharan")

UNKNOWN_PORT = "UNKNOWN"

DATASET_KINDS = ("conflicts", "cities", "edges", "ports", "ledgers", "regions")

FILE_NAMES: Mapping[str, str] = {
    "conflicts": "conflicts.csv",
    "cities": "cities.csv",
    "edges": "edges.csv",
    "ports": "ports.csv",
    "ledgers": "ledgers.csv",
    "regions": "regions.json",
}

# mean WGS84 degree lengths; adequate at the few-degree scale of the data
KM_PER_DEG_LAT = 110.574
KM_PER_DEG_LON_EQUATOR = 111.320


# ---------------------------------------------------------------------------
# record types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConflictEvent:
    """One dated, located, intensity-coded conflict observation."""

    id: str
    lon: float
    lat: float
    start_year: int
    end_year: int
    intensity: int

    def __post_init__(self):
        if not (math.isfinite(self.lon) and math.isfinite(self.lat)):
            raise DomainError(f"conflict {self.id!r}: non-finite coordinates")
        if self.start_year > self.end_year:
            raise DomainError(
                f"conflict {self.id!r}: start_year {self.start_year} after "
                f"end_year {self.end_year}")
        if self.intensity not in VALID_INTENSITIES:
            raise DomainError(
                f"conflict {self.id!r}: intensity {self.intensity} not in "
                f"{VALID_INTENSITIES}")


@dataclass(frozen=True)
class CitySite:
    """A named trade-network node with its years of existence."""

    name: str
    lon: float
    lat: float
    exist_from: int
    exist_to: int
    role: str = "interior"

    def __post_init__(self):
        if not (math.isfinite(self.lon) and math.isfinite(self.lat)):
            raise DomainError(f"city {self.name!r}: non-finite coordinates")
        if self.exist_from > self.exist_to:
            raise DomainError(
                f"city {self.name!r}: exist_from {self.exist_from} after "
                f"exist_to {self.exist_to}")
        if self.role not in ROLES:
            raise DomainError(f"city {self.name!r}: unknown role {self.role!r}")

    @property
    def is_sale(self) -> bool:
        return self.role != "interior"

    def active(self, year: int) -> bool:
        return self.exist_from <= year <= self.exist_to


@dataclass(frozen=True)
class TradeEdge:
    """A traversable connection between two cities."""

    src: str
    dst: str
    directed: bool = False

    def __post_init__(self):
        if self.src == self.dst:
            raise DomainError(f"edge {self.src!r}->{self.dst!r}: self-loop")


@dataclass(frozen=True)
class PortRecord:
    """Recorded departures from one port in one year (port may be UNKNOWN)."""

    year: int
    port: str
    count: int

    def __post_init__(self):
        if self.count < 0:
            raise DomainError(f"port record {self.port!r}/{self.year}: "
                              f"negative count")


@dataclass(frozen=True)
class ShipLedger:
    """Region-of-origin counts for the passengers of one ship."""

    ship_id: str
    year: int
    port: str
    region_counts: Mapping[str, int]

    def __post_init__(self):
        counts = dict(self.region_counts)
        if any(c < 0 for c in counts.values()):
            raise DomainError(f"ledger {self.ship_id!r}: negative count")
        if not any(c > 0 for c in counts.values()):
            raise DomainError(f"ledger {self.ship_id!r}: no positive count")
        object.__setattr__(self, "region_counts", counts)


@dataclass(frozen=True)
class RegionPolygon:
    """A closed lon/lat ring naming a region over a span of years."""

    region: str
    year_from: int
    year_to: int
    ring: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ring = tuple((float(x), float(y)) for x, y in self.ring)
        if len(ring) < 3:
            raise DomainError(f"region {self.region!r}: ring has <3 vertices")
        if ring[0] != ring[-1]:
            ring = ring + (ring[0],)
        object.__setattr__(self, "ring", ring)

    def active(self, year: int) -> bool:
        return self.year_from <= year <= self.year_to


@dataclass(frozen=True)
class GeoFrame:
    """Equirectangular km frame centered on the dataset centroid.

    ``project``/``unproject`` are exact linear inverses, so round trips are
    identity to machine precision.
    """

    origin_lon: float
    origin_lat: float
    km_per_deg_lon: float
    km_per_deg_lat: float

    def __post_init__(self):
        if self.km_per_deg_lon <= 0 or self.km_per_deg_lat <= 0:
            raise DomainError("GeoFrame scale factors must be positive")

    @classmethod
    def from_points(cls, lons: Iterable[float], lats: Iterable[float]) -> "GeoFrame":
        lons = np.asarray(list(lons), dtype=float)
        lats = np.asarray(list(lats), dtype=float)
        if lons.size == 0:
            raise DomainError("cannot build a GeoFrame from zero points")
        lat0 = float(lats.mean())
        return cls(
            origin_lon=float(lons.mean()),
            origin_lat=lat0,
            km_per_deg_lon=KM_PER_DEG_LON_EQUATOR * math.cos(math.radians(lat0)),
            km_per_deg_lat=KM_PER_DEG_LAT,
        )

    def project(self, lon, lat):
        return project(lon, lat, self)

    def unproject(self, x, y):
        lon = np.asarray(x, dtype=float) / self.km_per_deg_lon + self.origin_lon
        lat = np.asarray(y, dtype=float) / self.km_per_deg_lat + self.origin_lat
        if lon.ndim == 0:
            return float(lon), float(lat)
        return lon, lat


def project(lon, lat, frame: GeoFrame):
    """Project lon/lat degrees into the frame's km coordinates.

    Accepts scalars or arrays; raises ``DomainError`` on non-finite input.
    """
    lon = np.asarray(lon, dtype=float)
    lat = np.asarray(lat, dtype=float)
    if not (np.all(np.isfinite(lon)) and np.all(np.isfinite(lat))):
        raise DomainError("project: non-finite coordinates")
    x = (lon - frame.origin_lon) * frame.km_per_deg_lon
    y = (lat - frame.origin_lat) * frame.km_per_deg_lat
    if x.ndim == 0:
        return float(x), float(y)
    return x, y


# ---------------------------------------------------------------------------
# loading / serialization
# ---------------------------------------------------------------------------

_HEADERS = {
    "conflicts": ["id", "lon", "lat", "start_year", "end_year", "intensity"],
    "cities": ["name", "lon", "lat", "exist_from", "exist_to", "role"],
    "edges": ["from", "to", "directed"],
    "ports": ["year", "port", "count"],
    "ledgers": ["ship_id", "year", "port", "region", "count"],
}


def _text(source) -> str:
    if isinstance(source, (str, Path)):
        return Path(source).read_text(encoding="utf-8")
    if isinstance(source, bytes):
        return source.decode("utf-8")
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data


def _field(row: Mapping[str, str], name: str, line: int, conv):
    raw = row.get(name)
    if raw is None or raw == "":
        raise ParseError("missing value", line=line, column=name)
    try:
        return conv(raw)
    except (TypeError, ValueError):
        raise ParseError(f"cannot parse {raw!r}", line=line, column=name) from None


def _csv_rows(kind: str, text: str):
    reader = csv.DictReader(io.StringIO(text))
    expected = _HEADERS[kind]
    if reader.fieldnames is None or list(reader.fieldnames) != expected:
        raise SchemaError(
            f"{kind}: expected header {','.join(expected)}, "
            f"got {reader.fieldnames}")
    # DictReader consumes the header, so data rows start at line 2
    return ((i + 2, row) for i, row in enumerate(reader))


def load_dataset(kind: str, source) -> list:
    """Load one dataset ``kind`` from a byte stream, path, or bytes.

    Returns typed records in file order. Raises ``ParseError`` (with line and
    column) for malformed rows, ``SchemaError`` for duplicate city names or a
    bad header.
    """
    if kind not in DATASET_KINDS:
        raise DomainError(f"unknown dataset kind {kind!r}")
    text = _text(source)
    if kind == "regions":
        return _load_regions(text)

    records = []
    if kind == "conflicts":
        for line, row in _csv_rows(kind, text):
            try:
                records.append(ConflictEvent(
                    id=_field(row, "id", line, str),
                    lon=_field(row, "lon", line, float),
                    lat=_field(row, "lat", line, float),
                    start_year=_field(row, "start_year", line, int),
                    end_year=_field(row, "end_year", line, int),
                    intensity=_field(row, "intensity", line, int),
                ))
            except DomainError as exc:
                raise ParseError(str(exc), line=line) from None
    elif kind == "cities":
        seen = set()
        for line, row in _csv_rows(kind, text):
            try:
                rec = CitySite(
                    name=_field(row, "name", line, str),
                    lon=_field(row, "lon", line, float),
                    lat=_field(row, "lat", line, float),
                    exist_from=_field(row, "exist_from", line, int),
                    exist_to=_field(row, "exist_to", line, int),
                    role=_field(row, "role", line, str),
                )
            except DomainError as exc:
                raise ParseError(str(exc), line=line) from None
            if rec.name in seen:
                raise SchemaError(f"duplicate city name {rec.name!r} "
                                  f"(line {line})")
            seen.add(rec.name)
            records.append(rec)
    elif kind == "edges":
        for line, row in _csv_rows(kind, text):
            directed = _field(row, "directed", line, int)
            if directed not in (0, 1):
                raise ParseError(f"directed must be 0 or 1, got {directed}",
                                 line=line, column="directed")
            try:
                records.append(TradeEdge(
                    src=_field(row, "from", line, str),
                    dst=_field(row, "to", line, str),
                    directed=bool(directed),
                ))
            except DomainError as exc:
                raise ParseError(str(exc), line=line) from None
    elif kind == "ports":
        for line, row in _csv_rows(kind, text):
            try:
                records.append(PortRecord(
                    year=_field(row, "year", line, int),
                    port=_field(row, "port", line, str),
                    count=_field(row, "count", line, int),
                ))
            except DomainError as exc:
                raise ParseError(str(exc), line=line) from None
    elif kind == "ledgers":
        records = _load_ledgers(kind, text)
    return records


def _load_ledgers(kind: str, text: str) -> list[ShipLedger]:
    # long form: one (ship, region) pair per row, grouped by ship_id
    order: list[str] = []
    meta: dict[str, tuple[int, str]] = {}
    counts: dict[str, dict[str, int]] = {}
    for line, row in _csv_rows(kind, text):
        ship = _field(row, "ship_id", line, str)
        year = _field(row, "year", line, int)
        port = _field(row, "port", line, str)
        region = _field(row, "region", line, str)
        count = _field(row, "count", line, int)
        if count < 0:
            raise ParseError("negative count", line=line, column="count")
        if ship not in meta:
            order.append(ship)
            meta[ship] = (year, port)
            counts[ship] = {}
        elif meta[ship] != (year, port):
            raise SchemaError(
                f"ledger {ship!r}: inconsistent year/port at line {line}")
        counts[ship][region] = counts[ship].get(region, 0) + count
    ledgers = []
    for ship in order:
        year, port = meta[ship]
        try:
            ledgers.append(ShipLedger(ship, year, port, counts[ship]))
        except DomainError as exc:
            raise SchemaError(str(exc)) from None
    return ledgers


def _load_regions(text: str) -> list[RegionPolygon]:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"regions.json: {exc.msg}", line=exc.lineno) from None
    if not isinstance(raw, list):
        raise SchemaError("regions.json: expected a top-level list")
    records = []
    for i, obj in enumerate(raw):
        try:
            records.append(RegionPolygon(
                region=str(obj["region"]),
                year_from=int(obj["year_from"]),
                year_to=int(obj["year_to"]),
                ring=tuple((float(p[0]), float(p[1])) for p in obj["ring"]),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"regions.json entry {i}: {exc}") from None
        except DomainError as exc:
            raise SchemaError(f"regions.json entry {i}: {exc}") from None
    return records


def serialize_dataset(kind: str, records) -> bytes:
    """Inverse of :func:`load_dataset`; loading the output reproduces
    the records exactly."""
    if kind not in DATASET_KINDS:
        raise DomainError(f"unknown dataset kind {kind!r}")
    if kind == "regions":
        payload = [
            {"region": r.region, "year_from": r.year_from,
             "year_to": r.year_to, "ring": [list(p) for p in r.ring]}
            for r in records
        ]
        return (json.dumps(payload, indent=1) + "\n").encode("utf-8")

    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(_HEADERS[kind])
    for r in records:
        if kind == "conflicts":
            writer.writerow([r.id, repr(r.lon), repr(r.lat),
                             r.start_year, r.end_year, r.intensity])
        elif kind == "cities":
            writer.writerow([r.name, repr(r.lon), repr(r.lat),
                             r.exist_from, r.exist_to, r.role])
        elif kind == "edges":
            writer.writerow([r.src, r.dst, int(r.directed)])
        elif kind == "ports":
            writer.writerow([r.year, r.port, r.count])
        elif kind == "ledgers":
            for region, count in r.region_counts.items():
                writer.writerow([r.ship_id, r.year, r.port, region, count])
    return out.getvalue().encode("utf-8")


# ---------------------------------------------------------------------------
# queries
# ---------------------------------------------------------------------------

def active_conflicts(events: Iterable[ConflictEvent], year: int) -> list[ConflictEvent]:
    """Conflicts active in ``year`` with a modeled intensity code.

    Founded (0) and rebuilt (1) rows never enter the model; only attacks (5)
    and destructions (10) do.
    """
    return [e for e in events
            if e.start_year <= year <= e.end_year
            and e.intensity in MODELED_INTENSITIES]


def _distinct_vertices(ring) -> int:
    return len({(x, y) for x, y in ring})


def _on_segment(px, py, x1, y1, x2, y2, eps=1e-12) -> bool:
    cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
    scale = max(abs(x2 - x1), abs(y2 - y1), 1.0)
    if abs(cross) > eps * scale:
        return False
    dot = (px - x1) * (x2 - x1) + (py - y1) * (y2 - y1)
    sq = (x2 - x1) ** 2 + (y2 - y1) ** 2
    return -eps <= dot <= sq + eps


def point_in_region(point, polygon: RegionPolygon) -> bool:
    """Even-odd ray-casting membership test; boundary points count as inside."""
    if _distinct_vertices(polygon.ring) < 3:
        raise DomainError(
            f"region {polygon.region!r}: fewer than 3 distinct vertices")
    px, py = float(point[0]), float(point[1])
    ring = polygon.ring
    inside = False
    for (x1, y1), (x2, y2) in zip(ring[:-1], ring[1:]):
        if _on_segment(px, py, x1, y1, x2, y2):
            return True
        if (y1 > py) != (y2 > py):
            x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if px < x_cross:
                inside = not inside
    return inside


def assign_region(point, polygons: Iterable[RegionPolygon],
                  year: int | None = None) -> str | None:
    """First polygon (in input order, filtered by year) containing the point.

    The first-match rule plus the boundary-counts-as-inside convention means
    every point resolves to at most one region.
    """
    for poly in polygons:
        if year is not None and not poly.active(year):
            continue
        if point_in_region(point, poly):
            return poly.region
    return None


# ---------------------------------------------------------------------------
# aggregate dataset
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    """All inputs of one data directory, cross-validated and immutable."""

    conflicts: tuple[ConflictEvent, ...]
    cities: tuple[CitySite, ...]
    edges: tuple[TradeEdge, ...]
    ports: tuple[PortRecord, ...]
    ledgers: tuple[ShipLedger, ...]
    regions: tuple[RegionPolygon, ...]
    frame: GeoFrame

    @classmethod
    def from_records(cls, conflicts, cities, edges, ports=(), ledgers=(),
                     regions=()) -> "Dataset":
        conflicts = tuple(conflicts)
        cities = tuple(cities)
        edges = tuple(edges)
        ports = tuple(ports)
        ledgers = tuple(ledgers)
        regions = tuple(regions)

        names = {c.name for c in cities}
        for e in edges:
            for endpoint in (e.src, e.dst):
                if endpoint not in names:
                    raise ReferentialError(
                        f"edge {e.src!r}->{e.dst!r}: unknown city "
                        f"{endpoint!r}")
        for p in ports:
            if p.port != UNKNOWN_PORT and p.port not in names:
                raise ReferentialError(
                    f"port record {p.year}: unknown port {p.port!r}")
        for led in ledgers:
            if led.port not in names:
                raise ReferentialError(
                    f"ledger {led.ship_id!r}: unknown port {led.port!r}")

        lons = [c.lon for c in cities] + [e.lon for e in conflicts]
        lats = [c.lat for c in cities] + [e.lat for e in conflicts]
        frame = GeoFrame.from_points(lons, lats)
        return cls(conflicts, cities, edges, ports, ledgers, regions, frame)

    @classmethod
    def from_dir(cls, data_dir) -> "Dataset":
        data_dir = Path(data_dir)
        loaded = {}
        for kind, fname in FILE_NAMES.items():
            path = data_dir / fname
            if not path.exists():
                if kind in ("ports", "ledgers", "regions"):
                    loaded[kind] = []
                    continue
                raise SchemaError(f"missing dataset file {path}")
            loaded[kind] = load_dataset(kind, path)
        return cls.from_records(
            loaded["conflicts"], loaded["cities"], loaded["edges"],
            loaded["ports"], loaded["ledgers"], loaded["regions"])

    def city(self, name: str) -> CitySite:
        for c in self.cities:
            if c.name == name:
                return c
        raise KeyError(name)

    def years_with_conflicts(self) -> list[int]:
        years = set()
        for e in self.conflicts:
            if e.intensity in MODELED_INTENSITIES:
                years.update(range(e.start_year, e.end_year + 1))
        return sorted(years)
