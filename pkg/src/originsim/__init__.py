"""Conflict-surface kriging and trade-network MDP routing.

Two-stage spatial simulator: discrete conflict events are kriged into
annual intensity surfaces that generate capture locations, and each captured
individual is routed through a trade-network Markov decision process to an
absorbing point-of-sale. The results power conditional origin-probability
maps, chi-square validation scores, and a year/port exploration service.
"""

from .errors import (
    DataError,
    DomainError,
    NumericalError,
    OriginsimError,
)
from .geodata import (
    CitySite,
    ConflictEvent,
    Dataset,
    GeoFrame,
    PortRecord,
    RegionPolygon,
    ShipLedger,
    TradeEdge,
    active_conflicts,
    load_dataset,
    point_in_region,
    project,
    serialize_dataset,
)
from .grids import GridSpec, IntensityGrid
from .kde import GaussianHeatmap, KdeSpec, conditional_map, kde2d
from .mdp import (
    MdpModel,
    Policy,
    ValueFunction,
    build_mdp,
    policy_iteration,
    rollout,
    value_iteration,
)
from .network import (
    AugmentedNetwork,
    EdgeCostTable,
    TradeNetwork,
    augment_with_sales,
    build_network,
    conflict_scaled_costs,
    nearest_node,
)
from .simulate import (
    CaptiveRecord,
    SimulationResult,
    YearConfig,
    aggregate_by_port,
    chi_square,
    draw_rewards,
    grid_search,
    score_port_totals,
    score_ships,
    simulate_year,
)
from .surface import (
    CovarianceParams,
    EmpiricalVariogram,
    MaternKriging,
    cov_matrix,
    empirical_variogram,
    fit_variogram,
    gp_log_density,
    krig_surface,
    matern_cov,
    normalize_to_pdf,
    sample_origins,
)

__version__ = "0.1.0"
