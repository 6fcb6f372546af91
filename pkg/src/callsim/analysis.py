"""Information-staleness theory: closed-form delays and coverage expectations.

Two sharing styles move node-state information through a chain of agents that
jointly route tasks:

* nearest-neighbour relay: each agent asks the next one during routing and
  receives back an estimate round-trip; knowledge of an agent k hops away has
  filtered through k-1 earlier task episodes.
* completion cascade: after a task completes, the terminal agent's state is
  relayed backwards one hop per tick, so staleness grows only with hop count.

The coverage expectation quantifies how many distinct state changes are
missed when observations arrive with a given gap.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

__all__ = [
    "DelayParams",
    "StateDwellSpec",
    "nn_delay",
    "ptc_delay",
    "nn_delay_nonperiodic",
    "expected_state_changes",
]

MAX_DWELL_STATES = 25


@dataclass(frozen=True)
class DelayParams:
    """Timing parameters of the task chain.

    t_c: period between successive task originations (ticks)
    dt: per-hop message latency (ticks)
    k: hop distance between the observer and the observed agent
    """

    t_c: int
    dt: int
    k: int

    def __post_init__(self):
        if self.t_c <= 0 or self.dt <= 0:
            raise ValueError("t_c and dt must be positive")
        if self.k < 1:
            raise ValueError("hop distance k must be >= 1")


def nn_delay(p: DelayParams) -> int:
    """Staleness of k-hop knowledge under nearest-neighbour sharing:
    (k-1)(t_c - dt) + dt."""
    return (p.k - 1) * (p.t_c - p.dt) + p.dt


def ptc_delay(p: DelayParams) -> int:
    """Staleness of k-hop knowledge under post-completion sharing: k*dt."""
    return p.k * p.dt


def nn_delay_nonperiodic(intervals: Sequence[int], dt: int, k: int) -> int:
    """Nearest-neighbour staleness with irregular episode intervals.

    ``intervals[0]`` is the most recent inter-task interval, ``intervals[1]``
    the one before, and so on; the first k-1 entries are consumed.  Reduces to
    the periodic formula when all intervals equal t_c.
    """
    if k < 1:
        raise ValueError("hop distance k must be >= 1")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if len(intervals) < k - 1:
        raise ValueError(f"need at least {k - 1} intervals, got {len(intervals)}")
    if any(t <= 0 for t in intervals[: k - 1]):
        raise ValueError("intervals must be positive")
    return sum(intervals[: k - 1]) - (k - 2) * dt


@dataclass(frozen=True)
class StateDwellSpec:
    """A node cycling through M states with known dwell times.

    durations: dwell time of each state (ticks, positive)
    gap: observation gap t_D, strictly less than the total dwell time
    values: optional state values (labels only; the counting uses durations)
    """

    durations: tuple[int, ...]
    gap: int
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        m = len(self.durations)
        if m < 1:
            raise ValueError("need at least one state")
        if m > MAX_DWELL_STATES:
            raise ValueError(f"at most {MAX_DWELL_STATES} states supported")
        if any(d <= 0 for d in self.durations):
            raise ValueError("dwell durations must be positive")
        if self.values is not None and len(self.values) != m:
            raise ValueError("values must match durations in length")
        if not 0 <= self.gap < sum(self.durations):
            raise ValueError("gap must satisfy 0 <= gap < total dwell time")


def _count_bounded_subsets(durations: Sequence[int], size: int, budget: int) -> int:
    """Number of `size`-element subsets whose durations sum to <= budget.

    Exact integer dynamic programming over (subset size, duration sum).
    """
    if size == 0:
        return 1
    # counts[s] maps duration-sum -> number of s-element subsets reaching it
    counts: list[dict[int, int]] = [{0: 1}] + [dict() for _ in range(size)]
    for d in durations:
        for s in range(min(size, len(counts) - 1) - 1, -1, -1):
            nxt = counts[s + 1]
            for w, c in counts[s].items():
                nw = w + d
                if nw <= budget:
                    nxt[nw] = nxt.get(nw, 0) + c
    return sum(counts[size].values())


def expected_state_changes(spec: StateDwellSpec, h: int) -> Fraction:
    """Expected value for observing h distinct state changes within the gap.

    Counts the (h+1)-element dwell subsets that fit inside the gap against
    all (h+1)-element choices; exact rational arithmetic throughout.
    """
    m = len(spec.durations)
    if not 0 <= h < m:
        raise ValueError(f"h must be in [0, {m}), got {h}")
    from math import comb

    fitting = _count_bounded_subsets(spec.durations, h + 1, spec.gap)
    return Fraction(fitting, comb(m, h + 1))
