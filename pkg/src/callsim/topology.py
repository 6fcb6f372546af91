"""Network topologies: loading, random geometric generation, hop distances.

Nodes are dense integer ids in ``[0, N)``.  Graphs are undirected, connected,
simple (no self-loops, no duplicate edges).  The canonical interchange format
is a line-oriented text file::

    # comment
    nodes 6
    edge 0 1
    edge 1 2
    ...
    pos 0 0.10 0.25     # optional unit-square coordinates

``pos`` lines are present for geometric graphs, where an edge exists exactly
when the endpoint distance is within the generation radius.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field

__all__ = [
    "Topology",
    "TopologyError",
    "load_topology",
    "parse_topology",
    "generate_random_geometric",
    "min_hop_distances",
]


class TopologyError(ValueError):
    """Malformed topology file or invariant violation."""


@dataclass(frozen=True)
class Topology:
    """Validated undirected connected graph.

    Attributes:
        node_count: number of nodes N
        edges: canonical (lo, hi) pairs, sorted
        positions: optional per-node unit-square coordinates
        radius: link radius used at generation time, if generated
        neighbors: per-node sorted neighbour tuples (derived)
    """

    node_count: int
    edges: tuple[tuple[int, int], ...]
    positions: tuple[tuple[float, float], ...] | None = None
    radius: float | None = None
    neighbors: tuple[tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        n = self.node_count
        if n < 1:
            raise TopologyError("node_count must be >= 1")
        seen = set()
        adj: list[list[int]] = [[] for _ in range(n)]
        for a, b in self.edges:
            if not (0 <= a < n and 0 <= b < n):
                raise TopologyError(f"edge ({a},{b}) out of range for {n} nodes")
            if a == b:
                raise TopologyError(f"self-loop at node {a}")
            key = (a, b) if a < b else (b, a)
            if key in seen:
                raise TopologyError(f"duplicate edge ({a},{b})")
            seen.add(key)
            adj[a].append(b)
            adj[b].append(a)
        canonical = tuple(sorted(seen))
        object.__setattr__(self, "edges", canonical)
        object.__setattr__(self, "neighbors", tuple(tuple(sorted(v)) for v in adj))
        if not self._connected():
            raise TopologyError("graph is not connected")
        if self.positions is not None:
            if len(self.positions) != n:
                raise TopologyError("positions must cover every node")
            if self.radius is not None:
                for a, b in canonical:
                    if _dist(self.positions[a], self.positions[b]) > self.radius + 1e-12:
                        raise TopologyError(f"edge ({a},{b}) longer than radius")

    def _connected(self) -> bool:
        if self.node_count == 1:
            return True
        seen = bytearray(self.node_count)
        seen[0] = 1
        queue = deque([0])
        count = 1
        while queue:
            v = queue.popleft()
            for w in self.neighbors[v]:
                if not seen[w]:
                    seen[w] = 1
                    count += 1
                    queue.append(w)
        return count == self.node_count

    @property
    def mean_degree(self) -> float:
        return 2.0 * len(self.edges) / self.node_count

    def to_text(self) -> str:
        """Serialise back to the interchange format."""
        lines = [f"nodes {self.node_count}"]
        lines += [f"edge {a} {b}" for a, b in self.edges]
        if self.positions is not None:
            lines += [
                f"pos {i} {x:.6f} {y:.6f}" for i, (x, y) in enumerate(self.positions)
            ]
        return "\n".join(lines) + "\n"


def _dist(p: tuple[float, float], q: tuple[float, float]) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def parse_topology(text: str) -> Topology:
    """Parse interchange-format text into a validated Topology."""
    node_count = None
    edges: list[tuple[int, int]] = []
    positions: dict[int, tuple[float, float]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "nodes" and len(parts) == 2:
                node_count = int(parts[1])
            elif parts[0] == "edge" and len(parts) == 3:
                edges.append((int(parts[1]), int(parts[2])))
            elif parts[0] == "pos" and len(parts) == 4:
                positions[int(parts[1])] = (float(parts[2]), float(parts[3]))
            else:
                raise ValueError
        except ValueError:
            raise TopologyError(f"line {lineno}: cannot parse {raw!r}") from None
    if node_count is None:
        raise TopologyError("missing 'nodes N' line")
    pos_tuple = None
    if positions:
        if sorted(positions) != list(range(node_count)):
            raise TopologyError("pos lines must cover every node exactly once")
        pos_tuple = tuple(positions[i] for i in range(node_count))
    return Topology(node_count, tuple(edges), pos_tuple)


def load_topology(path) -> Topology:
    """Load and validate a topology file."""
    with open(path, "rt", encoding="utf-8") as fh:
        return parse_topology(fh.read())


def generate_random_geometric(
    n: int, radius: float, seed: int, max_retries: int = 100
) -> Topology:
    """Random geometric graph: n nodes uniform in the unit square, edge iff
    the Euclidean distance is <= radius.

    Deterministic in (n, radius, seed).  Disconnected draws are retried with
    fresh derived seeds; after ``max_retries`` failures we fail loudly rather
    than silently adding edges.
    """
    if n < 2:
        raise TopologyError("need at least 2 nodes")
    if not 0.0 < radius <= math.sqrt(2.0) + 1e-12:
        raise TopologyError("radius must be in (0, sqrt(2)]")
    for attempt in range(max_retries):
        rng = random.Random(f"geo:{seed}:{attempt}")
        pts = [(rng.random(), rng.random()) for _ in range(n)]
        edges = [
            (i, j)
            for i in range(n)
            for j in range(i + 1, n)
            if _dist(pts[i], pts[j]) <= radius
        ]
        try:
            return Topology(n, tuple(edges), tuple(pts), radius)
        except TopologyError:
            continue
    raise TopologyError(
        f"no connected geometric graph in {max_retries} attempts "
        f"(n={n}, radius={radius}, seed={seed})"
    )


def min_hop_distances(topo: Topology) -> list[list[int]]:
    """All-pairs minimum hop counts by BFS from every node.

    Returns an N x N matrix ``dist`` with dist[i][i] == 0 and
    dist[i][j] == 1 exactly for edges.
    """
    n = topo.node_count
    neighbors = topo.neighbors
    table = []
    for src in range(n):
        dist = [-1] * n
        dist[src] = 0
        queue = deque([src])
        while queue:
            v = queue.popleft()
            dv = dist[v]
            for w in neighbors[v]:
                if dist[w] < 0:
                    dist[w] = dv + 1
                    queue.append(w)
        table.append(dist)
    return table
