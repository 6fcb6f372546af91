"""Shared fixtures: tiny worlds with hand-placed calls for scripted scenarios."""

import pytest

from callsim.simcore import Call, SimConfig, World, build_world, step
from callsim.topology import Topology, parse_topology

# effectively disables random originations while keeping the schedule valid
NO_LOAD = ((0, 1e-12),)


def path_topology(n: int) -> Topology:
    return Topology(n, tuple((i, i + 1) for i in range(n - 1)))


def cycle_topology(n: int) -> Topology:
    edges = tuple((i, i + 1) for i in range(n - 1)) + ((0, n - 1),)
    return Topology(n, edges)


def make_world(
    topo: Topology,
    strategy: str = "ptc-m",
    seed: int = 0,
    total_ticks: int = 1000,
    load=NO_LOAD,
    **overrides,
) -> World:
    cfg = SimConfig(
        topology="inline",
        strategy=strategy,
        total_ticks=total_ticks,
        setup_time=overrides.pop("setup_time", 50),
        mean_duration=overrides.pop("mean_duration", 100),
        seed=seed,
        load_schedule=load,
        metrics_window=overrides.pop("metrics_window", total_ticks),
        **overrides,
    )
    world = build_world(topo, cfg)
    world.check_invariants = True
    return world


def inject_call(world: World, source: int, dest: int, duration: int = 100,
                t_live: int | None = None) -> Call:
    """Place one call at its source, mirroring the origination phase."""
    call = Call(
        world._next_call_id, source, dest, world.tick,
        t_live if t_live is not None else world.config.setup_time,
        duration, world.hop_dist[source][dest],
    )
    world._next_call_id += 1
    world.calls[call.call_id] = call
    world.metrics.on_originate(call.dist)
    world.izds.on_originate(world, call)
    world.strategy.start_call(world, call)
    return call


def run_ticks(world: World, n: int) -> World:
    for _ in range(n):
        step(world)
    return world


@pytest.fixture
def path5():
    return path_topology(5)
