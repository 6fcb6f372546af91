"""Per-run measurement: success counters, windowed series, summaries.

Counted quantities: originated calls (overall and per minimum hop distance),
connected calls, oracle-connectable calls, and reward-bearing message hops.
The run is cut into fixed windows; each window contributes one point to the
success-rate, oracle-rate, and message-rate series.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from statistics import fmean, pstdev
from typing import Sequence

__all__ = [
    "MetricAccumulators",
    "DynamismSummary",
    "steady_state_average",
    "per_distance_rates",
    "dynamism_summary",
]


class MetricAccumulators:
    """Counters and windowed series for one run."""

    __slots__ = (
        "window",
        "no",
        "nc",
        "nc_izds",
        "no_d",
        "nc_d",
        "success_series",
        "izds_series",
        "message_rate_series",
        "stale_discards",
        "late_releases",
        "loops_detected",
        "drops_capacity",
        "drops_deadline",
        "drops_noroute",
        "connect_hops",
        "_w_no",
        "_w_nc",
        "_w_izds",
        "_w_hops",
        "_ticks_in_window",
    )

    def __init__(self, window: int):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self.no = 0
        self.nc = 0
        self.nc_izds = 0
        self.no_d: dict[int, int] = {}
        self.nc_d: dict[int, int] = {}
        self.success_series: list[float] = []
        self.izds_series: list[float] = []
        self.message_rate_series: list[float] = []
        self.stale_discards = 0
        self.late_releases = 0
        self.loops_detected = 0
        self.drops_capacity = 0
        self.drops_deadline = 0
        self.drops_noroute = 0
        self.connect_hops = 0
        self._w_no = 0
        self._w_nc = 0
        self._w_izds = 0
        self._w_hops = 0
        self._ticks_in_window = 0

    # -- event hooks -------------------------------------------------------

    def on_originate(self, dist: int) -> None:
        self.no += 1
        self._w_no += 1
        self.no_d[dist] = self.no_d.get(dist, 0) + 1

    def on_connect(self, dist: int, hops: int = 0) -> None:
        self.nc += 1
        self._w_nc += 1
        self.nc_d[dist] = self.nc_d.get(dist, 0) + 1
        self.connect_hops += hops

    def on_izds_found(self) -> None:
        self.nc_izds += 1
        self._w_izds += 1

    def count_reward_hop(self) -> None:
        """One reward-bearing message crossed one link."""
        self._w_hops += 1

    def end_tick(self) -> None:
        self._ticks_in_window += 1
        if self._ticks_in_window == self.window:
            no = self._w_no
            self.success_series.append(self._w_nc / no if no else 0.0)
            self.izds_series.append(self._w_izds / no if no else 0.0)
            self.message_rate_series.append(self._w_hops / self.window)
            self._w_no = self._w_nc = self._w_izds = self._w_hops = 0
            self._ticks_in_window = 0

    # -- whole-run ratios ------------------------------------------------------

    @property
    def success_rate(self) -> float:
        return self.nc / self.no if self.no else 0.0

    @property
    def izds_rate(self) -> float:
        return self.nc_izds / self.no if self.no else 0.0


def steady_state_average(
    series: Sequence[float], burn_in_fraction: float = 0.2
) -> tuple[float, float]:
    """Mean and standard deviation over the post-burn-in windows."""
    if not 0.0 <= burn_in_fraction < 1.0:
        raise ValueError("burn_in_fraction must be in [0, 1)")
    skip = int(len(series) * burn_in_fraction)
    tail = series[skip:]
    if not tail:
        raise ValueError("series shorter than the burn-in")
    return fmean(tail), pstdev(tail)


def per_distance_rates(acc: MetricAccumulators) -> dict[int, float]:
    """Success rate per minimum hop distance, for distances with traffic."""
    return {
        d: acc.nc_d.get(d, 0) / n for d, n in sorted(acc.no_d.items()) if n > 0
    }


@dataclass
class DynamismSummary:
    """Per load-interval spread of the percentage difference of a comparison
    series against a baseline, plus its variation across intervals."""

    per_interval: list[tuple[float, float, float]]  # (min, mean, max)
    mean_min: float = field(init=False)
    std_min: float = field(init=False)
    mean_mean: float = field(init=False)
    std_mean: float = field(init=False)
    mean_max: float = field(init=False)
    std_max: float = field(init=False)

    def __post_init__(self):
        mins = [t[0] for t in self.per_interval]
        means = [t[1] for t in self.per_interval]
        maxes = [t[2] for t in self.per_interval]
        self.mean_min, self.std_min = fmean(mins), pstdev(mins)
        self.mean_mean, self.std_mean = fmean(means), pstdev(means)
        self.mean_max, self.std_max = fmean(maxes), pstdev(maxes)


def dynamism_summary(
    series_a: Sequence[float],
    series_b: Sequence[float],
    load_schedule: Sequence[tuple[int, float]],
    window: int,
) -> DynamismSummary:
    """Summarise 100*(a-b)/b per load interval.

    Windows are assigned to the load level in force at their starting tick;
    a zero baseline value inside an interval is an error.
    """
    if len(series_a) != len(series_b):
        raise ValueError("series must be aligned")
    if not series_a:
        raise ValueError("empty series")
    starts = [s for s, _ in load_schedule]
    buckets: dict[int, list[float]] = {}
    for w, (a, b) in enumerate(zip(series_a, series_b)):
        if b == 0:
            raise ValueError(f"zero baseline value in window {w}")
        interval = bisect_right(starts, w * window) - 1
        buckets.setdefault(interval, []).append(100.0 * (a - b) / b)
    per_interval = [
        (min(vals), fmean(vals), max(vals)) for _, vals in sorted(buckets.items())
    ]
    return DynamismSummary(per_interval)
