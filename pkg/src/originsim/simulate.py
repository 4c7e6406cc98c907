"""End-to-end annual pipeline and validation scoring.

One simulated year: krig the active conflicts, normalize to a pdf, sample
capture locations, and route each captive through a freshly solved MDP with
its own randomized reward vector. Every random draw derives from the config
seed through per-captive subseeds, so results are bit-identical across
reruns and across worker counts.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, ScoringError
from .geodata import (
    Dataset,
    PortRecord,
    RegionPolygon,
    ShipLedger,
    UNKNOWN_PORT,
    assign_region,
)
from .grids import GridSpec, IntensityGrid
from .mdp import (
    MdpModel,
    UNRESOLVED,
    _initial_policy,
    build_mdp,
    policy_iteration,
    rollout,
    with_rewards,
)
from .network import (
    AugmentedNetwork,
    augment_with_sales,
    build_network,
    conflict_scaled_costs,
    nearest_node,
)
from .surface import CovarianceParams, krig_surface, normalize_to_pdf, sample_origins

# stream tags keeping the origin sampler and the per-captive generators on
# disjoint deterministic substreams of the config seed
_ORIGIN_STREAM = 0
_CAPTIVE_STREAM = 1


@dataclass(frozen=True)
class YearConfig:
    """Everything one simulated year depends on."""

    year: int
    covariance: CovarianceParams
    c_max: float = 3.0
    epsilon: float = 0.1
    gamma: float = 1.0
    reward_mean: float | Mapping[str, float] = 10.0
    reward_sd: float | Mapping[str, float] = 1.0
    n_captives: int = 10_000
    seed: int = 0
    grid: GridSpec | None = None
    samples_per_edge: int = 100
    max_steps: int = 500

    def __post_init__(self):
        if self.n_captives < 1:
            raise DomainError("n_captives must be >= 1")
        sds = (self.reward_sd.values()
               if isinstance(self.reward_sd, Mapping) else [self.reward_sd])
        if any(sd < 0 for sd in sds):
            raise DomainError("reward_sd must be >= 0")


@dataclass(frozen=True)
class CaptiveRecord:
    """One simulated individual from capture to point-of-sale."""

    captive_id: int
    capture_point: tuple[float, float]
    entry_node: str
    path: tuple[str, ...]
    sale: str
    reward_draw: tuple[float, ...]


@dataclass(frozen=True)
class SimulationResult:
    config: YearConfig
    captives: tuple[CaptiveRecord, ...]
    port_counts: dict[str, int]
    n_unresolved: int
    sale_cities: tuple[str, ...]
    frame: object = None
    intensity: IntensityGrid | None = None
    pdf: IntensityGrid | None = None

    @property
    def year(self) -> int:
        return self.config.year


def _per_sink_vector(spec, sale_cities: Sequence[str], what: str) -> np.ndarray:
    if isinstance(spec, Mapping):
        missing = [c for c in sale_cities if c not in spec]
        if missing:
            raise DomainError(f"{what} missing for sinks: {', '.join(missing)}")
        return np.array([float(spec[c]) for c in sale_cities])
    return np.full(len(sale_cities), float(spec))


def draw_rewards(mean, sd, seed) -> np.ndarray:
    """One per-sink reward vector: independent normals floored at 1% of
    the mean (sale prices cannot go negative). Deterministic per seed."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    sd = np.atleast_1d(np.asarray(sd, dtype=float))
    if sd.shape == (1,) and mean.shape != (1,):
        sd = np.full_like(mean, sd[0])
    if mean.shape != sd.shape:
        raise DomainError("mean/sd length mismatch")
    if np.any(sd < 0):
        raise DomainError("sd must be >= 0")
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    draws = rng.normal(mean, sd)
    return np.maximum(draws, 0.01 * mean)


# ---------------------------------------------------------------------------
# pipeline stages
# ---------------------------------------------------------------------------

def default_grid(data: Dataset, nx: int = 256, ny: int = 192,
                 pad_km: float = 25.0) -> GridSpec:
    """Raster covering every city and conflict, padded on all sides."""
    lons = np.array([c.lon for c in data.cities]
                    + [e.lon for e in data.conflicts])
    lats = np.array([c.lat for c in data.cities]
                    + [e.lat for e in data.conflicts])
    x, y = data.frame.project(lons, lats)
    return GridSpec.around_points(np.column_stack([x, y]), nx=nx, ny=ny,
                                  pad_km=pad_km)


def capture_stage(cfg: YearConfig, data: Dataset):
    """Krig, normalize, sample: the conflict-driven half of the pipeline."""
    grid = cfg.grid or default_grid(data)
    intensity = krig_surface(data.conflicts, cfg.covariance, grid, cfg.year,
                             data.frame)
    pdf = normalize_to_pdf(intensity)
    origin_seed = np.random.SeedSequence((cfg.seed, _ORIGIN_STREAM))
    points = sample_origins(pdf, cfg.n_captives, origin_seed)
    return intensity, pdf, points


def _build_routing(cfg: YearConfig, data: Dataset, intensity: IntensityGrid):
    net = build_network(data.cities, data.edges, cfg.year, data.frame)
    costs = conflict_scaled_costs(net, intensity, cfg.c_max,
                                  cfg.samples_per_edge)
    aug = augment_with_sales(net)
    means = _per_sink_vector(cfg.reward_mean, aug.sale_cities, "reward_mean")
    sds = _per_sink_vector(cfg.reward_sd, aug.sale_cities, "reward_sd")
    model = build_mdp(aug, costs, means, epsilon=cfg.epsilon, gamma=cfg.gamma)
    return net, costs, aug, model, means, sds


def _route_one(model: MdpModel, aug: AugmentedNetwork, cfg: YearConfig,
               means: np.ndarray, sds: np.ndarray, captive_id: int,
               entry: int, point, init_sa_row: np.ndarray) -> CaptiveRecord:
    rng = np.random.default_rng(
        np.random.SeedSequence((cfg.seed, _CAPTIVE_STREAM, captive_id)))
    rewards = draw_rewards(means, sds, rng)
    captive_model = with_rewards(model, rewards)
    policy, _ = policy_iteration(captive_model, init_sa_row=init_sa_row)
    path_idx, sink = rollout(captive_model, policy, entry, rng,
                             max_steps=cfg.max_steps)
    n_cities = aug.base.n_nodes
    path = tuple(
        aug.base.names[s] if s < n_cities else aug.sink_city(s)
        for s in path_idx)
    sale = aug.sink_city(sink) if sink is not None else UNRESOLVED
    return CaptiveRecord(
        captive_id=captive_id,
        capture_point=(float(point[0]), float(point[1])),
        entry_node=aug.base.names[entry],
        path=path,
        sale=sale,
        reward_draw=tuple(float(r) for r in rewards),
    )


def _route_chunk(args):
    model, aug, cfg, means, sds, ids, entries, points, init = args
    return [
        _route_one(model, aug, cfg, means, sds, i, e, p, init)
        for i, e, p in zip(ids, entries, points)
    ]


def routing_stage(cfg: YearConfig, data: Dataset, intensity: IntensityGrid,
                  points: np.ndarray, n_workers: int = 1):
    """Route every captive; output is independent of ``n_workers``."""
    net, costs, aug, model, means, sds = _build_routing(cfg, data, intensity)
    entries = [nearest_node(p, net) for p in points]
    ids = list(range(len(points)))
    # the hop-count start depends only on structure, not on reward draws
    init = _initial_policy(model)
    if n_workers <= 1:
        records = _route_chunk((model, aug, cfg, means, sds, ids, entries,
                                points, init))
    else:
        chunks = np.array_split(np.arange(len(points)), n_workers * 4)
        jobs = [(model, aug, cfg, means, sds,
                 [ids[i] for i in chunk], [entries[i] for i in chunk],
                 points[chunk], init)
                for chunk in chunks if len(chunk)]
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(_route_chunk, jobs))
        records = [rec for part in parts for rec in part]
        records.sort(key=lambda r: r.captive_id)
    return aug, tuple(records)


def simulate_year(cfg: YearConfig, data: Dataset,
                  n_workers: int = 1) -> SimulationResult:
    """Full annual pipeline; a pure function of (datasets, config)."""
    intensity, pdf, points = capture_stage(cfg, data)
    aug, records = routing_stage(cfg, data, intensity, points, n_workers)
    counts, unresolved = _tally(records)
    return SimulationResult(
        config=cfg, captives=records, port_counts=counts,
        n_unresolved=unresolved, sale_cities=aug.sale_cities,
        frame=data.frame, intensity=intensity, pdf=pdf)


def _tally(records: Iterable[CaptiveRecord]):
    counts: dict[str, int] = {}
    unresolved = 0
    for r in records:
        if r.sale == UNRESOLVED:
            unresolved += 1
        else:
            counts[r.sale] = counts.get(r.sale, 0) + 1
    return counts, unresolved


def aggregate_by_port(result: SimulationResult) -> dict[str, int]:
    """Recount resolved captives per sink (UNRESOLVED kept separate)."""
    counts, _ = _tally(result.captives)
    return counts


SIMULATION_CSV_HEADER = "captive_id,x_km,y_km,lon,lat,entry_node,sale,steps"


def simulation_to_csv(result: SimulationResult) -> str:
    """One row per captive; the file the scorer and server read back."""
    lines = [SIMULATION_CSV_HEADER]
    for c in result.captives:
        x, y = c.capture_point
        lon, lat = result.frame.unproject(x, y)
        lines.append(
            f"{c.captive_id},{x!r},{y!r},{lon!r},{lat!r},"
            f"{c.entry_node},{c.sale},{len(c.path) - 1}")
    return "\n".join(lines) + "\n"


def captives_from_csv(text: str) -> list[CaptiveRecord]:
    """Reload the capture/sale columns needed for scoring and KDE maps."""
    lines = text.strip().splitlines()
    if not lines or lines[0] != SIMULATION_CSV_HEADER:
        raise DomainError("not a simulation CSV (bad header)")
    records = []
    for line in lines[1:]:
        cid, x, y, _lon, _lat, entry, sale, steps = line.split(",")
        records.append(CaptiveRecord(
            captive_id=int(cid), capture_point=(float(x), float(y)),
            entry_node=entry, path=(entry,), sale=sale, reward_draw=()))
    return records


# ---------------------------------------------------------------------------
# chi-square scoring
# ---------------------------------------------------------------------------

#: categories with a smaller expected count are pooled before scoring
MIN_EXPECTED = 5.0


@dataclass(frozen=True)
class ChiSquare:
    statistic: float
    df: int
    n_pooled: int = 0


def chi_square(observed, expected_probs) -> ChiSquare:
    """Pearson goodness-of-fit with small-expected-count pooling.

    Categories whose expected count falls below ``MIN_EXPECTED`` are merged
    into a single rest bucket; degrees of freedom are the retained category
    count minus one.
    """
    obs = np.asarray(observed, dtype=float)
    probs = np.asarray(expected_probs, dtype=float)
    if obs.shape != probs.shape or obs.ndim != 1:
        raise DomainError("observed/expected shape mismatch")
    if abs(float(probs.sum()) - 1.0) > 1e-9:
        raise DomainError(f"expected probabilities sum to {probs.sum()!r}")
    if np.any(probs < 0) or np.any(obs < 0):
        raise DomainError("negative category values")
    total = float(obs.sum())
    if total <= 0:
        raise DomainError("observed counts are all zero")
    expected = total * probs
    small = expected < MIN_EXPECTED
    keep_obs = list(obs[~small])
    keep_exp = list(expected[~small])
    n_pooled = int(small.sum())
    if n_pooled:
        keep_obs.append(float(obs[small].sum()))
        keep_exp.append(float(expected[small].sum()))
    keep_obs = np.asarray(keep_obs)
    keep_exp = np.asarray(keep_exp)
    nonzero = keep_exp > 0
    stat = float((((keep_obs - keep_exp) ** 2)[nonzero]
                  / keep_exp[nonzero]).sum())
    return ChiSquare(statistic=stat, df=max(len(keep_obs) - 1, 0),
                     n_pooled=n_pooled)


def score_ships(result: SimulationResult, ledgers: Iterable[ShipLedger],
                regions: Sequence[RegionPolygon]) -> tuple[float, dict[str, ChiSquare]]:
    """Score simulated origins against per-ship region-of-origin ledgers.

    For each ledger of the simulated year, captives sold at the ship's port
    are assigned regions by point-in-polygon on their capture points (first
    matching polygon wins, boundaries count as inside); the resulting model
    proportions are the expected probabilities for the ledger's observed
    counts. Ship scores are independent, so the total is their sum.
    """
    year = result.year
    relevant = [led for led in ledgers if led.year == year]
    per_ship: dict[str, ChiSquare] = {}
    total = 0.0
    for led in relevant:
        sold_here = [c for c in result.captives if c.sale == led.port]
        if not sold_here:
            raise ScoringError(
                f"ledger {led.ship_id!r}: no simulated sale at port "
                f"{led.port!r} in {year}")
        region_names = list(led.region_counts.keys())
        model_counts = dict.fromkeys(region_names, 0)
        assigned = 0
        for c in sold_here:
            lon, lat = result.frame.unproject(*c.capture_point)
            region = assign_region((lon, lat), regions, year=year)
            if region in model_counts:
                model_counts[region] += 1
                assigned += 1
        if assigned == 0:
            raise ScoringError(
                f"ledger {led.ship_id!r}: no simulated capture point falls "
                f"in any ledger region")
        probs = np.array([model_counts[r] / assigned for r in region_names])
        obs = np.array([led.region_counts[r] for r in region_names],
                       dtype=float)
        score = chi_square(obs, probs)
        per_ship[led.ship_id] = score
        total += score.statistic
    return total, per_ship


def score_port_totals(result: SimulationResult,
                      ports: Iterable[PortRecord], year: int) -> ChiSquare:
    """Score simulated sale counts against recorded port shares.

    UNKNOWN-port rows are reported in the data but excluded here; expected
    shares renormalize over the year's known ports.
    """
    known = [p for p in ports if p.year == year and p.port != UNKNOWN_PORT]
    total_recorded = sum(p.count for p in known)
    if not known or total_recorded <= 0:
        raise ScoringError(f"no known-port records for {year}")
    port_names = [p.port for p in known]
    probs = np.array([p.count / total_recorded for p in known])
    obs = np.array([result.port_counts.get(name, 0) for name in port_names],
                   dtype=float)
    if obs.sum() <= 0:
        raise ScoringError(
            f"no simulated sales at any recorded port in {year}")
    return chi_square(obs, probs)


# ---------------------------------------------------------------------------
# parameter search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SearchCell:
    c_max: float
    epsilon: float
    reward_sd: float
    total_score: float
    per_year: dict[int, float] = field(default_factory=dict)
    error: str | None = None

    @property
    def params(self) -> tuple[float, float, float]:
        return (self.c_max, self.epsilon, self.reward_sd)


def grid_search(param_grid: Mapping[str, Sequence[float]], data: Dataset,
                years: Sequence[int], base: YearConfig,
                use_ledgers: bool = True) -> list[SearchCell]:
    """Evaluate every (c_max, epsilon, reward_sd) cell and rank by total χ².

    All cells share the base seed, and within a year they share the capture
    stage (the searched parameters only affect routing), so each cell's
    result is identical to a standalone ``simulate_year`` run. Failed cells
    are recorded with an error instead of aborting the search. Ascending
    score order; ties break lexicographically on the parameter triple.
    """
    c_maxes = list(param_grid.get("c_max", [base.c_max]))
    epsilons = list(param_grid.get("epsilon", [base.epsilon]))
    sds = list(param_grid.get("reward_sd", [base.reward_sd]))
    if not (c_maxes and epsilons and sds):
        raise DomainError("parameter grid must be nonempty")

    captures: dict[int, tuple] = {}
    for year in years:
        cfg_year = replace(base, year=year)
        captures[year] = capture_stage(cfg_year, data)

    cells: list[SearchCell] = []
    for c_max, epsilon, sd in itertools.product(c_maxes, epsilons, sds):
        per_year: dict[int, float] = {}
        error = None
        total = 0.0
        for year in years:
            cfg = replace(base, year=year, c_max=c_max, epsilon=epsilon,
                          reward_sd=sd)
            intensity, pdf, points = captures[year]
            try:
                aug, records = routing_stage(cfg, data, intensity, points)
                counts, unresolved = _tally(records)
                result = SimulationResult(
                    config=cfg, captives=records, port_counts=counts,
                    n_unresolved=unresolved, sale_cities=aug.sale_cities,
                    frame=data.frame)
                score = 0.0
                if any(p.year == year and p.port != UNKNOWN_PORT
                       for p in data.ports):
                    score += score_port_totals(result, data.ports, year).statistic
                if use_ledgers and any(l.year == year for l in data.ledgers):
                    ship_total, _ = score_ships(result, data.ledgers,
                                                data.regions)
                    score += ship_total
                per_year[year] = score
                total += score
            except Exception as exc:  # recorded per cell, search continues
                error = f"{year}: {exc}"
                total = float("inf")
                break
        cells.append(SearchCell(c_max=c_max, epsilon=epsilon, reward_sd=sd,
                                total_score=total, per_year=per_year,
                                error=error))
    cells.sort(key=lambda c: (c.total_score, c.params))
    return cells
