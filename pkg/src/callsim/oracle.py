"""Instantaneous global path-availability tracking (upper-bound oracle).

Alongside the real (hop-by-hop, delayed, estimate-driven) routing, every
open call is checked against the question an omniscient dispatcher could
answer instantly: does a path exist right now on which every node, endpoints
included, has a free unit?  The count of calls for which the answer was ever
yes upper-bounds the count the routing strategy can connect.

Observation only: the oracle never reserves or releases anything.  Units a
call already holds along its own partial path count as available to that
call, so a call the real router connects is always credited here too.
"""

from __future__ import annotations

from collections import deque

from .simcore import FORWARDING, Call, SimulationError, World
from .topology import Topology

__all__ = ["izds_path_exists", "IzdsTracker"]


def izds_path_exists(
    topo: Topology,
    free_units: list[int],
    source: int,
    destination: int,
    extra_free: frozenset[int] | set[int] = frozenset(),
) -> bool:
    """True iff some source->destination path has free >= 1 at every node
    (endpoints included).  Nodes in ``extra_free`` count as available
    regardless of their counter.  BFS restricted to available nodes."""
    if source == destination:
        raise ValueError("source and destination must differ")
    if free_units[source] < 1 and source not in extra_free:
        return False
    if free_units[destination] < 1 and destination not in extra_free:
        return False
    neighbors = topo.neighbors
    seen = bytearray(topo.node_count)
    seen[source] = 1
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for w in neighbors[v]:
            if not seen[w]:
                if w == destination:
                    return True
                if free_units[w] >= 1 or w in extra_free:
                    seen[w] = 1
                    queue.append(w)
    return False


class IzdsTracker:
    """Per-run availability flags and the resulting upper-bound counter."""

    def __init__(self, metrics):
        self.metrics = metrics
        self.found: set[int] = set()
        self.pending: set[int] = set()   # open, not yet found

    # -- lifecycle hooks ---------------------------------------------------

    def on_originate(self, world: World, call: Call) -> None:
        """Check once immediately on arrival, before the call's first
        forwarding action touches any counter."""
        free = [ns.free for ns in world.nodes]
        if izds_path_exists(world.topo, free, call.source, call.destination):
            self._mark(call)
        else:
            self.pending.add(call.call_id)

    def on_connect(self, world: World, call: Call) -> None:
        """The real router just connected this call; the oracle must have
        seen a path by now (the call's own reservations cover one)."""
        if call.call_id in self.found:
            return
        held = world.holdings.get(call.call_id, {})
        free = [ns.free for ns in world.nodes]
        if not izds_path_exists(
            world.topo, free, call.source, call.destination, set(held)
        ):
            raise SimulationError(
                f"call {call.call_id} connected without an instantaneous path"
            )
        self.pending.discard(call.call_id)
        self._mark(call)

    def _mark(self, call: Call) -> None:
        call.izds_found = True
        self.found.add(call.call_id)
        self.metrics.on_izds_found()

    # -- per-tick sweep ------------------------------------------------------

    def izds_tick(self, world: World) -> None:
        """Re-check every still-open, still-unfound call against the current
        occupancy.  Runs before this tick's originations."""
        pending = self.pending
        if not pending:
            return
        calls = world.calls
        stale = []
        active = []
        for call_id in pending:
            call = calls.get(call_id)
            if call is None or call.status != FORWARDING:
                stale.append(call_id)
            else:
                active.append(call)
        for call_id in stale:
            pending.discard(call_id)
        if not active:
            return
        active.sort(key=lambda c: c.call_id)

        free = [ns.free for ns in world.nodes]
        comp = self._components(world.topo, free)
        for call in active:
            s, d = call.source, call.destination
            if free[s] >= 1 and free[d] >= 1 and comp[s] == comp[d]:
                ok = True
            else:
                held = world.holdings.get(call.call_id, {})
                ok = izds_path_exists(world.topo, free, s, d, set(held))
            if ok:
                pending.discard(call.call_id)
                self._mark(call)

    @staticmethod
    def _components(topo: Topology, free: list[int]) -> list[int]:
        """Label connected components of the free-node subgraph."""
        n = topo.node_count
        comp = [-1] * n
        neighbors = topo.neighbors
        label = 0
        for start in range(n):
            if comp[start] >= 0 or free[start] < 1:
                continue
            comp[start] = label
            queue = deque([start])
            while queue:
                v = queue.popleft()
                for w in neighbors[v]:
                    if comp[w] < 0 and free[w] >= 1:
                        comp[w] = label
                        queue.append(w)
            label += 1
        return comp
