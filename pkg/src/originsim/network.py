"""Annual trade networks with conflict-scaled movement costs.

Builds the year's city graph from the loaded datasets, paints
``distance * (1 + conflict)`` costs onto its edges from a kriged conflict
surface, and augments the graph with one absorbing sale sink per
point-of-sale city. Ports keep their ordinary edges (coastal traffic between
ports stays legal); only the added sinks are terminal.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AugmentationError,
    ConnectivityError,
    CoverageError,
    DomainError,
)
from .geodata import CitySite, GeoFrame, TradeEdge
from .grids import IntensityGrid

DEFAULT_C_MAX = 3.0
DEFAULT_SAMPLES_PER_EDGE = 100


@dataclass(frozen=True)
class TradeNetwork:
    """Cities active in one year plus their traversable edges."""

    year: int
    nodes: tuple[CitySite, ...]
    adjacency: np.ndarray          # (n, n) bool, zero diagonal
    coords_km: np.ndarray          # (n, 2) projected positions
    frame: GeoFrame

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.nodes)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(name) from None

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])

    def sale_indices(self) -> list[int]:
        return [i for i, c in enumerate(self.nodes) if c.is_sale]


@dataclass(frozen=True)
class EdgeCostTable:
    """Per-edge distances, conflict factors in [0, c_max], and costs.

    ``cost = distance * (1 + factor)`` on edges, ``inf`` elsewhere.
    ``raw_edge_max`` keeps the unscaled per-edge surface maxima for
    diagnostics.
    """

    cost: np.ndarray
    distance_km: np.ndarray
    conflict_factor: np.ndarray
    raw_edge_max: np.ndarray
    c_max: float


@dataclass(frozen=True)
class AugmentedNetwork:
    """A trade network plus one absorbing sale state per sale-role city.

    State order is the network's nodes followed by the sinks; sink ``k``
    absorbs sales of city ``sale_cities[k]``.
    """

    base: TradeNetwork
    sale_cities: tuple[str, ...]

    @property
    def n_states(self) -> int:
        return self.base.n_nodes + len(self.sale_cities)

    @property
    def sink_offset(self) -> int:
        return self.base.n_nodes

    def sink_index(self, city: str) -> int:
        return self.sink_offset + self.sale_cities.index(city)

    def sink_city(self, state: int) -> str:
        return self.sale_cities[state - self.sink_offset]

    def state_names(self) -> list[str]:
        return list(self.base.names) + [f"sale:{c}" for c in self.sale_cities]

    def is_sink(self, state: int) -> bool:
        return state >= self.sink_offset


def build_network(cities: Iterable[CitySite], edges: Iterable[TradeEdge],
                  year: int, frame: GeoFrame | None = None) -> TradeNetwork:
    """Assemble the year's network from city and edge records.

    Keeps cities with ``exist_from <= year <= exist_to`` and edges whose
    endpoints are both kept; undirected rows fill both directions. Every
    node must reach at least one sale-role node, otherwise a
    ``ConnectivityError`` lists the stranded cities.
    """
    active = tuple(c for c in cities if c.active(year))
    if not active:
        raise ConnectivityError(f"no cities active in {year}")
    if frame is None:
        frame = GeoFrame.from_points([c.lon for c in active],
                                     [c.lat for c in active])
    index = {c.name: i for i, c in enumerate(active)}
    n = len(active)
    adj = np.zeros((n, n), dtype=bool)
    for e in edges:
        i = index.get(e.src)
        j = index.get(e.dst)
        if i is None or j is None:
            continue
        adj[i, j] = True
        if not e.directed:
            adj[j, i] = True

    x, y = frame.project(np.array([c.lon for c in active]),
                         np.array([c.lat for c in active]))
    coords = np.column_stack([x, y])
    net = TradeNetwork(year=year, nodes=active, adjacency=adj,
                       coords_km=coords, frame=frame)

    sales = net.sale_indices()
    if not sales:
        raise ConnectivityError(f"no sale-role city active in {year}",
                                stranded=net.names)
    reach = _reaches_any(adj, sales)
    if not np.all(reach):
        stranded = tuple(active[i].name for i in np.flatnonzero(~reach))
        raise ConnectivityError(
            f"{len(stranded)} node(s) cannot reach a point-of-sale in "
            f"{year}: {', '.join(stranded)}", stranded=stranded)
    return net


def _reaches_any(adj: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    # BFS over reversed edges from every sale node
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    queue = deque(targets)
    for t in targets:
        seen[t] = True
    radj = adj.T
    while queue:
        v = queue.popleft()
        for u in np.flatnonzero(radj[v]):
            if not seen[u]:
                seen[u] = True
                queue.append(u)
    return seen


def edge_list(net: TradeNetwork) -> list[tuple[int, int]]:
    """Directed edges (i, j) in row-major adjacency order."""
    ii, jj = np.nonzero(net.adjacency)
    return list(zip(ii.tolist(), jj.tolist()))


def conflict_scaled_costs(net: TradeNetwork, conflict: IntensityGrid,
                          c_max: float = DEFAULT_C_MAX,
                          samples_per_edge: int = DEFAULT_SAMPLES_PER_EDGE,
                          ) -> EdgeCostTable:
    """Edge costs ``distance * (1 + C)`` from a conflict surface.

    Each edge's raw conflict level is the maximum of the surface over
    ``samples_per_edge`` equispaced points along the segment (endpoints
    included, negatives floored at zero). Raw levels are scaled so the
    year's largest per-edge maximum equals exactly ``c_max``; an all-zero
    surface leaves every factor at zero. Raises ``CoverageError`` when the
    grid does not cover some sample point.
    """
    if c_max < 0:
        raise DomainError("c_max must be >= 0")
    if samples_per_edge < 2:
        raise DomainError("samples_per_edge must be >= 2")
    n = net.n_nodes
    dist = np.full((n, n), np.inf)
    raw = np.zeros((n, n))
    ts = np.linspace(0.0, 1.0, samples_per_edge)[:, None]
    for i, j in edge_list(net):
        a, b = net.coords_km[i], net.coords_km[j]
        dist[i, j] = float(np.hypot(*(b - a)))
        samples = a[None, :] + ts * (b - a)[None, :]
        try:
            vals = conflict.interp(samples)
        except CoverageError as exc:
            raise CoverageError(
                f"edge {net.names[i]!r}->{net.names[j]!r}: {exc}") from None
        raw[i, j] = max(float(vals.max()), 0.0)

    on_edge = net.adjacency
    factor = np.zeros((n, n))
    global_max = float(raw[on_edge].max()) if on_edge.any() else 0.0
    if global_max > 0.0:
        factor[on_edge] = raw[on_edge] / global_max * c_max
    cost = np.full((n, n), np.inf)
    cost[on_edge] = dist[on_edge] * (1.0 + factor[on_edge])
    return EdgeCostTable(cost=cost, distance_km=dist, conflict_factor=factor,
                         raw_edge_max=raw, c_max=c_max)


def augment_with_sales(net: TradeNetwork,
                       sale_cities: Sequence[str] | None = None,
                       year: int | None = None) -> AugmentedNetwork:
    """Attach one absorbing sale sink to each sale city.

    Existing edges are untouched: ports remain ordinary nodes with their
    coastal edges, and only the new sinks are terminal. Raises an
    ``AugmentationError`` when a requested sale city is not in the network.
    """
    if year is not None and year != net.year:
        raise AugmentationError(
            f"network is for {net.year}, not {year}")
    if sale_cities is None:
        sale_cities = [net.nodes[i].name for i in net.sale_indices()]
    sale_cities = tuple(sale_cities)
    if not sale_cities:
        raise AugmentationError("no sale cities to augment with")
    names = set(net.names)
    missing = [c for c in sale_cities if c not in names]
    if missing:
        raise AugmentationError(
            f"sale cities missing from the {net.year} network: "
            f"{', '.join(missing)}")
    return AugmentedNetwork(base=net, sale_cities=sale_cities)


def nearest_node(point, net: TradeNetwork) -> int:
    """Index of the Euclidean-nearest city; ties go to the lowest index."""
    if net.n_nodes == 0:
        raise DomainError("empty network")
    p = np.asarray(point, dtype=float)
    d2 = ((net.coords_km - p[None, :]) ** 2).sum(axis=1)
    return int(np.argmin(d2))


def network_to_json_dict(net: TradeNetwork,
                         costs: EdgeCostTable | None = None) -> dict:
    """Export shape consumed by the server and UI."""
    nodes = [{"name": c.name, "lon": c.lon, "lat": c.lat, "role": c.role}
             for c in net.nodes]
    edges = []
    for i, j in edge_list(net):
        if costs is not None:
            d = float(costs.distance_km[i, j])
            cost = float(costs.cost[i, j])
        else:
            d = float(np.hypot(*(net.coords_km[j] - net.coords_km[i])))
            cost = d
        edges.append({"from": net.names[i], "to": net.names[j],
                      "distance_km": d, "cost": cost})
    return {"year": net.year, "nodes": nodes, "edges": edges}
