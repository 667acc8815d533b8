"""Routing-preference inference from bicycle GPS trajectories."""

from ._core import (
    Alpha,
    DataError,
    RoadNetwork,
    UsageError,
    config_hash,
    contingency_agreement,
    edge_weight,
    kmeans,
    load_network,
    max_detour_ratio,
    min_decomposition,
    relieff,
    route,
    run_all,
    shortest_path,
    znormalize,
)

__all__ = [
    "Alpha",
    "DataError",
    "RoadNetwork",
    "UsageError",
    "config_hash",
    "contingency_agreement",
    "edge_weight",
    "kmeans",
    "load_network",
    "max_detour_ratio",
    "min_decomposition",
    "relieff",
    "route",
    "run_all",
    "shortest_path",
    "znormalize",
]
