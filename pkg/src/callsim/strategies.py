"""Routing strategies: neighbour selection, learning updates, communication.

All four strategies share the same per-hop skeleton when a forward request
arrives: reject when out of capacity or past the setup deadline, excise and
penalise loops, connect at the destination, otherwise pick a neighbour by
Boltzmann exploration over learned values, reserve a unit, and pass the call
on.  They differ in what travels alongside and when estimates get updated:

* ``ptc-a`` / ``ptc-m``: nothing during setup; after a call connects, the
  connect message walks back accumulating actual node states, and each hop
  learns from their average (ptc-a) or minimum (ptc-m).
* ``qr``: every contacted node immediately answers the sender with its own
  bottleneck estimate for the destination; the sender learns from that.
* ``tpot-rl``: forwarders stamp their current estimate onto the request;
  destinations bank the stamped requests and every ``update_interval`` ticks
  send them back up the path, each hop learning from the minimum of the
  downstream stamps.  Values are additionally keyed by a two-level link-usage
  feature maintained over a sliding window.
"""

from __future__ import annotations

import math
import random
from typing import Sequence

from .simcore import (
    CONNECTED,
    FORWARDING,
    M_C,
    M_CR,
    M_D,
    M_F,
    M_P,
    M_R,
    Call,
    Message,
    SimConfig,
    World,
)
from .topology import Topology

__all__ = [
    "QTable",
    "TpotQTable",
    "LinkUsageMonitor",
    "boltzmann_probabilities",
    "select_neighbor",
    "update_q",
    "reward_ptc_a",
    "reward_ptc_m",
    "qr_feedback",
    "compute_penalty",
    "tpot_feature",
    "make_strategy",
    "Strategy",
]

Q_MIN, Q_MAX = -1.0, 1.0


class QTable:
    """Per-agent estimate store: (destination, neighbour) -> value in [-1, 1],
    dense over every destination and adjacent neighbour."""

    __slots__ = ("values",)

    def __init__(self, n_destinations: int, neighbors: Sequence[int], init: float):
        self.values = {
            (d, nb): init for d in range(n_destinations) for nb in neighbors
        }

    def get(self, destination: int, neighbor: int) -> float:
        return self.values[(destination, neighbor)]

    def set(self, destination: int, neighbor: int, value: float) -> None:
        self.values[(destination, neighbor)] = value


class LinkUsageMonitor:
    """Sliding window of per-tick units held for calls routed via each
    neighbour.  A cold monitor reads as zero usage."""

    __slots__ = ("window", "threshold", "order", "index", "bufs", "sums", "pos", "total")

    def __init__(self, neighbors: Sequence[int], window: int, threshold: float):
        self.window = window
        self.threshold = threshold
        self.order = tuple(neighbors)
        self.index = {nb: j for j, nb in enumerate(self.order)}
        self.bufs = [[0] * window for _ in self.order]
        self.sums = [0] * len(self.order)
        self.pos = 0
        self.total = 0

    def record(self, counts: dict[int, int]) -> None:
        """Push the current per-neighbour unit counts into the window."""
        if not counts and self.total == 0:
            # all-zero buffers stay all-zero; only the cursor would move
            return
        pos = self.pos
        sums = self.sums
        for j, nb in enumerate(self.order):
            cur = counts.get(nb, 0)
            buf = self.bufs[j]
            old = buf[pos]
            if cur != old:
                buf[pos] = cur
                sums[j] += cur - old
                self.total += cur - old
        self.pos = (pos + 1) % self.window

    def mean_usage(self, neighbor: int) -> float:
        return self.sums[self.index[neighbor]] / self.window

    def feature(self, neighbor: int) -> str:
        return "high" if self.mean_usage(neighbor) > self.threshold else "low"


def tpot_feature(monitor: LinkUsageMonitor, neighbor: int) -> str:
    """Two-level action-dependent feature: 'high' exactly when the windowed
    mean usage via the neighbour strictly exceeds the threshold."""
    return monitor.feature(neighbor)


class TpotQTable(QTable):
    """Estimate store additionally keyed by the current usage feature of the
    neighbour; reads and writes resolve the feature at call time."""

    __slots__ = ("monitor",)

    def __init__(
        self,
        n_destinations: int,
        neighbors: Sequence[int],
        init: float,
        monitor: LinkUsageMonitor,
    ):
        self.monitor = monitor
        self.values = {
            (e, d, nb): init
            for e in ("low", "high")
            for d in range(n_destinations)
            for nb in neighbors
        }

    def get(self, destination: int, neighbor: int) -> float:
        return self.values[(self.monitor.feature(neighbor), destination, neighbor)]

    def set(self, destination: int, neighbor: int, value: float) -> None:
        self.values[(self.monitor.feature(neighbor), destination, neighbor)] = value


def boltzmann_probabilities(values: Sequence[float], tau: float) -> list[float]:
    """Selection distribution proportional to exp(value / tau).  The row
    maximum is subtracted before exponentiation, which leaves the
    distribution unchanged but keeps exp() in range at small tau."""
    m = max(values)
    weights = [math.exp((v - m) / tau) for v in values]
    total = math.fsum(weights)
    return [w / total for w in weights]


def select_neighbor(
    qtable: QTable,
    destination: int,
    neighbors: Sequence[int],
    exclude: int | None,
    tau: float,
    rng: random.Random,
) -> int | None:
    """Sample the next hop from the Boltzmann distribution over the agent's
    values toward the destination, never handing the call back to the node
    it came from.  Returns None when no neighbour is eligible (no route)."""
    eligible = [nb for nb in neighbors if nb != exclude]
    if not eligible:
        return None
    values = [qtable.get(destination, nb) for nb in eligible]
    m = max(values)
    weights = [math.exp((v - m) / tau) for v in values]
    r = rng.random() * math.fsum(weights)
    acc = 0.0
    for nb, w in zip(eligible, weights):
        acc += w
        if r < acc:
            return nb
    return eligible[-1]


def update_q(
    qtable: QTable, destination: int, neighbor: int, reward: float, alpha: float
) -> None:
    """Exponential smoothing toward the reward, clamped to [-1, 1]."""
    v = (1.0 - alpha) * qtable.get(destination, neighbor) + alpha * reward
    if v > Q_MAX:
        v = Q_MAX
    elif v < Q_MIN:
        v = Q_MIN
    qtable.set(destination, neighbor, v)


def reward_ptc_a(states: Sequence[float], hops: int) -> float:
    """Average of the downstream node states; ``hops`` is the on-route hop
    count to the destination and must equal the number of states."""
    if not states:
        raise ValueError("no downstream states to aggregate")
    if hops != len(states):
        raise ValueError("hop count must match the number of states")
    return math.fsum(states) / hops


def reward_ptc_m(states: Sequence[float]) -> float:
    """Minimum of the downstream node states (path bottleneck)."""
    if not states:
        raise ValueError("no downstream states to aggregate")
    return min(states)


def qr_feedback(
    own_state: float, qtable: QTable, destination: int, neighbors: Sequence[int]
) -> float:
    """A contacted node's bottleneck estimate toward the destination: its own
    state capped by the best of its onward values."""
    return min(own_state, max(qtable.get(destination, nb) for nb in neighbors))


def compute_penalty(hops_from_loop_end: int) -> float:
    """Loop penalty -0.9^(x+1); x = 0 at the node that detected the loop,
    decaying for nodes further back along the loop."""
    if hops_from_loop_end < 0:
        raise ValueError("hop distance must be non-negative")
    return -(0.9 ** (hops_from_loop_end + 1))


class Strategy:
    """Shared per-message dispatch; subclasses fill in the learning hooks."""

    name = "base"
    uses_feedback = False   # answer every forward request with an estimate
    shares_states = False   # connect message accumulates actual node states
    is_tpot = False

    def __init__(self, topo: Topology, config: SimConfig):
        self.topo = topo
        self.alpha = config.alpha
        self.tau = config.tau
        n = topo.node_count
        self.tables = [
            QTable(n, topo.neighbors[i], config.q_init) for i in range(n)
        ]

    # -- entry points ------------------------------------------------------

    def start_call(self, world: World, call: Call) -> None:
        """Inject the first forwarding action at the call source."""
        self._route(world, call.source, call, [], [], None)

    def handle_message(self, world: World, msg: Message) -> None:
        kind = msg.kind
        agent = msg.to_node
        if kind == M_R:
            call = world.calls.get(msg.call_id)
            if call is None or call.status != FORWARDING:
                world.metrics.stale_discards += 1
                return
            self._route(world, agent, call, msg.path, msg.payload, msg.from_node)
        elif kind == M_F:
            update_q(
                self.tables[agent], msg.call_dest, msg.from_node,
                msg.payload[0], self.alpha,
            )
        elif kind == M_C:
            self._on_connect_msg(world, agent, msg)
        elif kind == M_D:
            world.handle_md(agent, msg)
        elif kind == M_P:
            self._on_penalty_msg(world, agent, msg)
        elif kind == M_CR:
            self._on_reward_msg(world, agent, msg)
        else:
            raise ValueError(f"unknown message kind {kind!r}")

    def per_tick(self, world: World) -> None:
        pass

    # -- forward-request flow ------------------------------------------------

    def _route(
        self,
        world: World,
        agent: int,
        call: Call,
        path: list[int],
        payload: list[float],
        from_node: int | None,
    ) -> None:
        node = world.nodes[agent]
        if self.uses_feedback and from_node is not None:
            # answer the sender with the local estimate, state as the
            # request finds it; arrives one tick later
            estimate = qr_feedback(
                node.fraction_free, self.tables[agent],
                call.destination, self.topo.neighbors[agent],
            )
            world.send(
                M_F, call.call_id, call.source, call.destination,
                [], [estimate], agent, from_node,
            )
            world.metrics.count_reward_hop()

        if node.free == 0 or world.tick > call.t_o + call.t_live:
            cause = "capacity" if node.free == 0 else "deadline"
            world.drop_call(call, agent, path, cause)
            return

        if agent in path:
            # loop: penalise backwards around it, cut it from the live
            # record, and carry on routing from here
            loop_record = path + [agent]
            world.send(
                M_P, call.call_id, call.source, call.destination,
                loop_record, [], agent, from_node,
                penalty=compute_penalty(0), loop_source=agent,
            )
            world.metrics.loops_detected += 1
            first = path.index(agent)
            path = path[:first]
            if self.is_tpot:
                payload = payload[:first]

        if agent == call.destination:
            world.hold_fresh(agent, call.call_id)
            full_path = path + [agent]
            call.path = full_path
            world.connect_call(call)
            out_payload = [node.fraction_free] if self.shares_states else []
            if self.is_tpot:
                self._stash(agent, call, full_path, list(payload))
            world.send(
                M_C, call.call_id, call.source, call.destination,
                full_path, out_payload, agent, path[-1],
            )
            if self.shares_states:
                world.metrics.count_reward_hop()
            return

        choice = select_neighbor(
            self.tables[agent], call.destination,
            self.topo.neighbors[agent], from_node, self.tau, world.rng,
        )
        if choice is None:
            world.drop_call(call, agent, path, "noroute")
            return
        world.hold_pre(agent, call.call_id, via=choice)
        new_path = path + [agent]
        call.path = new_path
        if self.is_tpot:
            payload = payload + [self.tables[agent].get(call.destination, choice)]
            world.metrics.count_reward_hop()
        world.send(
            M_R, call.call_id, call.source, call.destination,
            new_path, payload, agent, choice,
        )

    # -- connect cascade -----------------------------------------------------

    def _on_connect_msg(self, world: World, agent: int, msg: Message) -> None:
        call = world.calls.get(msg.call_id)
        if call is None or call.status != CONNECTED:
            world.metrics.stale_discards += 1
            return
        world.convert_hold(agent, msg.call_id)
        path = msg.path
        idx = path.index(agent)
        payload = msg.payload
        if self.shares_states:
            update_q(
                self.tables[agent], msg.call_dest, path[idx + 1],
                self._aggregate(payload), self.alpha,
            )
            payload = payload + [world.nodes[agent].fraction_free]
        if idx > 0:
            world.send(
                M_C, msg.call_id, msg.call_source, msg.call_dest,
                path, payload, agent, path[idx - 1],
            )
            if self.shares_states:
                world.metrics.count_reward_hop()

    def _aggregate(self, states: Sequence[float]) -> float:
        raise NotImplementedError

    # -- penalty cascade -------------------------------------------------------

    def _on_penalty_msg(self, world: World, agent: int, msg: Message) -> None:
        path = msg.path
        idx = path.index(agent)
        update_q(
            self.tables[agent], msg.call_dest, path[idx + 1],
            msg.penalty, self.alpha,
        )
        if agent != msg.loop_source:
            x = len(path) - 1 - idx
            # free the unit reserved for the excised loop -- unless the call's
            # routing has since come back through this node, in which case the
            # unit is serving the live path again and stays
            call = world.calls.get(msg.call_id)
            if call is None or agent not in call.path:
                world.release_hold(agent, msg.call_id)
            world.send(
                M_P, msg.call_id, msg.call_source, msg.call_dest,
                path, [], agent, path[idx - 1],
                penalty=compute_penalty(x), loop_source=msg.loop_source,
            )

    # -- TPOT-only hooks -------------------------------------------------------

    def _stash(self, agent: int, call: Call, path: list[int], estimates: list[float]):
        raise NotImplementedError

    def _on_reward_msg(self, world: World, agent: int, msg: Message) -> None:
        raise ValueError(f"{self.name} does not use reward cascades")


class PtcStrategy(Strategy):
    """Post-completion sharing; aggregate = mean (ptc-a) or min (ptc-m)."""

    shares_states = True

    def __init__(self, topo, config, mode: str):
        super().__init__(topo, config)
        self.mode = mode
        self.name = f"ptc-{mode}"

    def _aggregate(self, states):
        if self.mode == "a":
            return reward_ptc_a(states, len(states))
        return reward_ptc_m(states)


class QrStrategy(Strategy):
    """Nearest-neighbour router: learns from per-hop feedback responses."""

    name = "qr"
    uses_feedback = True


class TpotStrategy(Strategy):
    """Feature-keyed values, stamped estimates, periodic reward cascades."""

    name = "tpot-rl"
    is_tpot = True

    def __init__(self, topo, config):
        super().__init__(topo, config)
        n = topo.node_count
        self.update_interval = config.update_interval
        self.monitors = [
            LinkUsageMonitor(
                topo.neighbors[i], config.activity_window, config.usage_threshold
            )
            for i in range(n)
        ]
        self.tables = [
            TpotQTable(n, topo.neighbors[i], config.q_init, self.monitors[i])
            for i in range(n)
        ]
        # per destination agent: routing records awaiting the next dispatch
        self.stashes: list[list[tuple[int, int, int, list[int], list[float]]]] = [
            [] for _ in range(n)
        ]

    def _stash(self, agent, call, path, estimates):
        self.stashes[agent].append(
            (call.call_id, call.source, call.destination, path, estimates)
        )

    def _on_reward_msg(self, world: World, agent: int, msg: Message) -> None:
        path = msg.path
        idx = path.index(agent)
        # same bottleneck aggregation as the min-sharing heuristic, over the
        # estimates stamped by the downstream forwarders (destination state
        # seeded at dispatch); no bandwidth moves on this cascade
        reward = min(msg.payload[idx + 1 :])
        update_q(
            self.tables[agent], msg.call_dest, path[idx + 1], reward, self.alpha
        )
        if idx > 0:
            world.send(
                M_CR, msg.call_id, msg.call_source, msg.call_dest,
                path, msg.payload, agent, path[idx - 1],
            )
            world.metrics.count_reward_hop()

    def per_tick(self, world: World) -> None:
        counts = world.via_counts
        for node, monitor in enumerate(self.monitors):
            monitor.record(counts[node])
        if world.tick % self.update_interval == 0:
            for agent, stash in enumerate(self.stashes):
                if not stash:
                    continue
                own_state = world.nodes[agent].fraction_free
                for call_id, source, dest, path, estimates in stash:
                    world.send(
                        M_CR, call_id, source, dest,
                        path, estimates + [own_state], agent, path[-2],
                    )
                    world.metrics.count_reward_hop()
                stash.clear()


def make_strategy(topo: Topology, config: SimConfig) -> Strategy:
    name = config.strategy
    if name == "ptc-a":
        return PtcStrategy(topo, config, "a")
    if name == "ptc-m":
        return PtcStrategy(topo, config, "m")
    if name == "qr":
        return QrStrategy(topo, config)
    if name == "tpot-rl":
        return TpotStrategy(topo, config)
    raise ValueError(f"unknown strategy {name!r}")
