"""Weighted bipartite networks and their statistics."""
from .bipartite import BipartiteNetwork, build_network
from .metrics import (
    NetworkStats,
    interaction_asymmetry,
    nested_rank,
    network_stats,
    node_stats,
    push_pull,
    weighted_connectance,
    weighted_nestedness,
    web_asymmetry,
)
from .modularity import ModularityResult, bipartite_modularity, modularity_q

__all__ = [
    "BipartiteNetwork",
    "ModularityResult",
    "NetworkStats",
    "bipartite_modularity",
    "build_network",
    "interaction_asymmetry",
    "modularity_q",
    "nested_rank",
    "network_stats",
    "node_stats",
    "push_pull",
    "weighted_connectance",
    "weighted_nestedness",
    "web_asymmetry",
]
