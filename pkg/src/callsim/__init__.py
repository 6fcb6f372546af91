"""callsim: discrete-time call routing with learning agents on mesh networks.

Four per-hop routing strategies (two post-completion sharing variants, a
nearest-neighbour Q-router, and a feature-based periodic-reward learner)
compete on circuit-switched bandwidth allocation, measured against an
instantaneous global-search upper bound.
"""

from .topology import (
    Topology,
    TopologyError,
    generate_random_geometric,
    load_topology,
    min_hop_distances,
)

__version__ = "0.1.0"
