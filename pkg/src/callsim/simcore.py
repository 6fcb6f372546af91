"""Discrete-time engine: clock, call lifecycle, bandwidth units, transport.

One tick per hop for every message.  Within a tick the processing order is
fixed (documented in :func:`step`) so a run is a pure function of
(config, seed).  Strategy logic (neighbour choice, learning updates,
per-strategy messages) lives in :mod:`callsim.strategies`; this module owns
the clock, the queues, and the unit accounting.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field

from .topology import Topology, min_hop_distances

__all__ = [
    "M_R",
    "M_C",
    "M_D",
    "M_P",
    "M_CR",
    "M_F",
    "FORWARDING",
    "CONNECTED",
    "DROPPED",
    "TERMINATED",
    "Message",
    "Call",
    "NodeState",
    "SimConfig",
    "World",
    "SimulationError",
    "build_world",
    "sample_duration",
    "step",
    "run",
]

# message kinds: forward request, connect, drop, loop penalty, periodic
# reward (estimate cascade), and the per-hop feedback response used by the
# nearest-neighbour router (the one kind not in the shared call-control set)
M_R = "m_r"
M_C = "m_c"
M_D = "m_d"
M_P = "m_p"
M_CR = "m_cr"
M_F = "m_f"

FORWARDING = "forwarding"
CONNECTED = "connected"
DROPPED = "dropped"
TERMINATED = "terminated"

STRATEGY_NAMES = ("ptc-a", "ptc-m", "qr", "tpot-rl")


class SimulationError(RuntimeError):
    """Internal invariant violation; aborts the run with diagnostics."""


@dataclass(slots=True)
class Message:
    """Typed envelope travelling one hop per tick.

    ``path`` is the routing record at send time: for forward requests the
    nodes visited so far (sender included, recipient not); for connect/drop
    /reward cascades the complete walk the cascade retraces; for penalties
    the full loop record with the detecting node appended.
    """

    kind: str
    call_id: int
    call_source: int
    call_dest: int
    path: list[int]
    payload: list[float]
    from_node: int | None
    to_node: int
    send_tick: int
    arrival_tick: int
    seq: int
    penalty: float = 0.0
    loop_source: int = -1


@dataclass(slots=True)
class Call:
    """Lifecycle record of one call."""

    call_id: int
    source: int
    destination: int
    t_o: int
    t_live: int
    duration: int
    dist: int                      # min-hop source->destination at origination
    path: list[int] = field(default_factory=list)
    status: str = FORWARDING
    connect_tick: int = -1
    izds_found: bool = False


@dataclass(slots=True)
class NodeState:
    """Per-node call-channel units: capacity, allocated, pre-allocated."""

    capacity: int
    allocated: int = 0
    pre_allocated: int = 0

    @property
    def free(self) -> int:
        return self.capacity - self.allocated - self.pre_allocated

    @property
    def fraction_free(self) -> float:
        """Agent state: fraction of unallocated call-channel units."""
        return self.free / self.capacity

    def pre_allocate(self) -> None:
        if self.free < 1:
            raise SimulationError("pre_allocate with no free unit")
        self.pre_allocated += 1

    def convert(self) -> None:
        if self.pre_allocated < 1:
            raise SimulationError("convert without a pre-allocated unit")
        self.pre_allocated -= 1
        self.allocated += 1

    def allocate_fresh(self) -> None:
        if self.free < 1:
            raise SimulationError("allocate with no free unit")
        self.allocated += 1

    def release(self, kind: str) -> None:
        if kind == "pre":
            if self.pre_allocated < 1:
                raise SimulationError("double release of pre-allocated unit")
            self.pre_allocated -= 1
        else:
            if self.allocated < 1:
                raise SimulationError("double release of allocated unit")
            self.allocated -= 1


@dataclass(frozen=True)
class SimConfig:
    """One run's parameters.  ``topology`` is a descriptor:
    ``file:<path>`` or ``geo:<n>:<radius>:<seed>``."""

    topology: str
    strategy: str
    total_ticks: int
    setup_time: int
    mean_duration: int
    seed: int = 0
    alpha: float = 0.03
    tau: float = 0.1
    capacity: int = 10
    load_schedule: tuple[tuple[int, float], ...] = ((0, 0.1),)
    metrics_window: int = 1000
    duration_dist: str = "geometric"
    q_init: float = 0.5
    activity_window: int = 100
    usage_threshold: float = 5.0
    update_interval: int = 100

    def __post_init__(self):
        if self.strategy not in STRATEGY_NAMES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")
        if self.setup_time < 1 or self.mean_duration < 1 or self.capacity < 1:
            raise ValueError("setup_time, mean_duration, capacity must be >= 1")
        if self.total_ticks < 1:
            raise ValueError("total_ticks must be >= 1")
        if self.total_ticks % self.metrics_window != 0:
            raise ValueError("total_ticks must be a multiple of metrics_window")
        if not self.load_schedule or self.load_schedule[0][0] != 0:
            raise ValueError("load_schedule must start at tick 0")
        last = -1
        for start, p in self.load_schedule:
            if start <= last:
                raise ValueError("load_schedule ticks must be strictly increasing")
            if not 0.0 < p < 1.0:
                raise ValueError("origination probabilities must be in (0, 1)")
            last = start
        if self.duration_dist not in ("geometric", "fixed"):
            raise ValueError("duration_dist must be 'geometric' or 'fixed'")


def sample_duration(rng: random.Random, mean: int, dist: str = "geometric") -> int:
    """Ticks a circuit holds once connected: geometric with the given mean
    (memoryless holding time), or fixed for debugging.  Always >= 1."""
    if dist == "fixed":
        return max(1, int(round(mean)))
    if mean <= 1:
        return 1
    u = rng.random()
    return max(1, math.ceil(math.log1p(-u) / math.log1p(-1.0 / mean)))


class World:
    """Mutable state of one run.  All stochastic draws flow through ``rng``
    in a fixed order, so (config, seed) determines every output."""

    def __init__(self, topo: Topology, config: SimConfig, strategy, metrics, izds):
        self.topo = topo
        self.config = config
        self.hop_dist = min_hop_distances(topo)
        self.nodes = [NodeState(config.capacity) for _ in range(topo.node_count)]
        self.strategy = strategy
        self.metrics = metrics
        self.izds = izds
        self.rng = random.Random(config.seed)
        self.tick = 0
        self.calls: dict[int, Call] = {}
        self.queue: dict[int, list[Message]] = {}
        self.holdings: dict[int, dict[int, tuple[str, int | None]]] = {}
        # per node: units currently held for calls forwarded via each neighbour
        self.via_counts: list[dict[int, int]] = [dict() for _ in range(topo.node_count)]
        self.termination_heap: list[tuple[int, int]] = []
        self._next_call_id = 0
        self._next_seq = 0
        self.check_invariants = False

    # ----- message transport -------------------------------------------

    def send(
        self,
        kind: str,
        call_id: int,
        call_source: int,
        call_dest: int,
        path: list[int],
        payload: list[float],
        from_node: int,
        to_node: int,
        penalty: float = 0.0,
        loop_source: int = -1,
    ) -> Message:
        msg = Message(
            kind,
            call_id,
            call_source,
            call_dest,
            path,
            payload,
            from_node,
            to_node,
            self.tick,
            self.tick + 1,
            self._next_seq,
            penalty,
            loop_source,
        )
        self._next_seq += 1
        self.queue.setdefault(msg.arrival_tick, []).append(msg)
        return msg

    # ----- unit accounting ---------------------------------------------

    def hold_pre(self, node: int, call_id: int, via: int) -> None:
        """Pre-allocate one unit at ``node`` for the call, attributed to the
        downstream neighbour ``via``.  Re-forwarding after loop excision
        re-attributes the existing unit instead of taking a second one."""
        held = self.holdings.setdefault(call_id, {})
        if node in held:
            kind, old_via = held[node]
            if old_via is not None:
                self._via_add(node, old_via, -1)
            held[node] = (kind, via)
            self._via_add(node, via, 1)
            return
        self.nodes[node].pre_allocate()
        held[node] = ("pre", via)
        self._via_add(node, via, 1)

    def hold_fresh(self, node: int, call_id: int) -> None:
        """Destination-side allocation: a fresh unit, no downstream link."""
        held = self.holdings.setdefault(call_id, {})
        if node in held:
            raise SimulationError("destination already holds a unit")
        self.nodes[node].allocate_fresh()
        held[node] = ("alloc", None)

    def convert_hold(self, node: int, call_id: int) -> None:
        held = self.holdings.get(call_id)
        if not held or node not in held or held[node][0] != "pre":
            raise SimulationError(f"no pre-allocation to convert at node {node}")
        self.nodes[node].convert()
        held[node] = ("alloc", held[node][1])

    def release_hold(self, node: int, call_id: int) -> bool:
        """Release the unit held at ``node`` for the call, if any.  Returns
        whether a unit was actually released (cascades may legitimately
        retrace nodes that another cascade already cleaned)."""
        held = self.holdings.get(call_id)
        if not held or node not in held:
            return False
        kind, via = held.pop(node)
        self.nodes[node].release(kind)
        if via is not None:
            self._via_add(node, via, -1)
        if not held:
            del self.holdings[call_id]
        return True

    def release_all(self, call_id: int) -> int:
        held = self.holdings.pop(call_id, None)
        if not held:
            return 0
        for node, (kind, via) in held.items():
            self.nodes[node].release(kind)
            if via is not None:
                self._via_add(node, via, -1)
        return len(held)

    def _via_add(self, node: int, via: int, delta: int) -> None:
        counts = self.via_counts[node]
        new = counts.get(via, 0) + delta
        if new:
            counts[via] = new
        else:
            counts.pop(via, None)

    # ----- call lifecycle ----------------------------------------------

    def connect_call(self, call: Call) -> None:
        """The forward request reached its destination with capacity: the
        call counts as connected and the circuit starts its countdown."""
        if self.tick > call.t_o + call.t_live:
            raise SimulationError("call connecting past its setup deadline")
        call.status = CONNECTED
        call.connect_tick = self.tick
        heapq.heappush(self.termination_heap, (self.tick + call.duration, call.call_id))
        self.izds.on_connect(self, call)
        self.metrics.on_connect(call.dist, len(call.path) - 1)

    def drop_call(
        self, call: Call, agent: int, path: list[int], cause: str = "capacity"
    ) -> None:
        """Stop forwarding: release the initiator's own unit, then tear down
        the recorded path with a drop cascade (or finish at once if there is
        nothing upstream)."""
        call.status = DROPPED
        if cause == "capacity":
            self.metrics.drops_capacity += 1
        elif cause == "deadline":
            self.metrics.drops_deadline += 1
        else:
            self.metrics.drops_noroute += 1
        self.release_hold(agent, call.call_id)
        target = None
        for node in reversed(path):
            if node != agent:
                target = node
                break
        if target is None:
            self.finalize_drop(call)
        else:
            self.send(
                M_D, call.call_id, call.source, call.destination,
                path, [], agent, target,
            )

    def handle_md(self, agent: int, msg: Message) -> None:
        """Drop cascade step: free the local unit, pass upstream, finish at
        the call source."""
        self.release_hold(agent, msg.call_id)
        path = msg.path
        idx = path.index(agent)
        if idx > 0:
            self.send(
                M_D, msg.call_id, msg.call_source, msg.call_dest,
                path, [], agent, path[idx - 1],
            )
        else:
            call = self.calls.get(msg.call_id)
            if call is not None:
                self.finalize_drop(call)

    def finalize_drop(self, call: Call) -> None:
        """The drop cascade is complete.  Any residual units (held by loop
        nodes whose penalty message is still in flight) are reclaimed now so
        a dropped call never leaks bandwidth past its teardown."""
        late = self.release_all(call.call_id)
        if late:
            self.metrics.late_releases += late
        self.calls.pop(call.call_id, None)

    def terminate_call(self, call: Call) -> None:
        call.status = TERMINATED
        self.release_all(call.call_id)
        self.calls.pop(call.call_id, None)

    # ----- per-tick phases ----------------------------------------------

    def current_load(self) -> float:
        p = self.config.load_schedule[0][1]
        for start, prob in self.config.load_schedule:
            if start <= self.tick:
                p = prob
            else:
                break
        return p

    def originate_calls(self, p: float) -> None:
        """One network-wide Bernoulli trial per tick: with probability p a
        call with uniformly random distinct endpoints enters at its source."""
        if self.rng.random() >= p:
            return
        n = self.topo.node_count
        source = self.rng.randrange(n)
        dest = self.rng.randrange(n - 1)
        if dest >= source:
            dest += 1
        duration = sample_duration(
            self.rng, self.config.mean_duration, self.config.duration_dist
        )
        call = Call(
            self._next_call_id,
            source,
            dest,
            self.tick,
            self.config.setup_time,
            duration,
            self.hop_dist[source][dest],
        )
        self._next_call_id += 1
        self.calls[call.call_id] = call
        self.metrics.on_originate(call.dist)
        self.izds.on_originate(self, call)
        self.strategy.start_call(self, call)

    def verify_invariants(self) -> None:
        """Recount every held unit from the holdings ledger and compare with
        the per-node counters; enforce capacity bounds."""
        n = self.topo.node_count
        pre = [0] * n
        alloc = [0] * n
        for call_id, held in self.holdings.items():
            for node, (kind, _via) in held.items():
                if kind == "pre":
                    pre[node] += 1
                else:
                    alloc[node] += 1
        for i, ns in enumerate(self.nodes):
            if ns.pre_allocated != pre[i] or ns.allocated != alloc[i]:
                raise SimulationError(
                    f"tick {self.tick}: node {i} counters "
                    f"({ns.allocated},{ns.pre_allocated}) disagree with "
                    f"holdings ({alloc[i]},{pre[i]})"
                )
            if not 0 <= ns.allocated + ns.pre_allocated <= ns.capacity:
                raise SimulationError(
                    f"tick {self.tick}: node {i} over capacity"
                )


def step(world: World) -> World:
    """Advance one tick.  Fixed phase order:

    1. terminate connected calls whose duration expired (all units released)
    2. deliver every message due this tick, in creation order
    3. strategy per-tick work (usage monitoring, periodic reward dispatch)
    4. path-availability tracking for calls opened on earlier ticks
    5. originate new calls at the scheduled probability (each new call is
       availability-checked on arrival, before its first forwarding action)
    6. record metrics, close the window if due
    """
    tick = world.tick
    cfg = world.config
    if tick >= cfg.total_ticks:
        raise SimulationError("stepping past total_ticks")

    heap = world.termination_heap
    while heap and heap[0][0] <= tick:
        _, call_id = heapq.heappop(heap)
        call = world.calls.get(call_id)
        if call is not None and call.status == CONNECTED:
            world.terminate_call(call)

    due = world.queue.pop(tick, None)
    if due:
        handle = world.strategy.handle_message
        for msg in due:
            if world.check_invariants and msg.arrival_tick != msg.send_tick + 1:
                raise SimulationError("message latency is not one tick")
            handle(world, msg)

    world.strategy.per_tick(world)
    world.izds.izds_tick(world)
    world.originate_calls(world.current_load())

    if world.check_invariants:
        world.verify_invariants()
    world.metrics.end_tick()
    world.tick = tick + 1
    return world


def run(world: World) -> World:
    while world.tick < world.config.total_ticks:
        step(world)
    return world


def build_world(topo: Topology, config: SimConfig) -> World:
    from .metrics import MetricAccumulators
    from .oracle import IzdsTracker
    from .strategies import make_strategy

    strategy = make_strategy(topo, config)
    metrics = MetricAccumulators(window=config.metrics_window)
    izds = IzdsTracker(metrics)
    return World(topo, config, strategy, metrics, izds)
