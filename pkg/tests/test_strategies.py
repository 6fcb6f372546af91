import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from callsim.strategies import (
    LinkUsageMonitor,
    QTable,
    boltzmann_probabilities,
    compute_penalty,
    qr_feedback,
    reward_ptc_a,
    reward_ptc_m,
    select_neighbor,
    tpot_feature,
    update_q,
)


class TestBoltzmann:
    def test_equal_values_exact_quarter(self):
        probs = boltzmann_probabilities([0.5, 0.5, 0.5, 0.5], tau=0.1)
        assert probs == [0.25, 0.25, 0.25, 0.25]

    def test_single_value(self):
        assert boltzmann_probabilities([0.3], tau=0.1) == [1.0]

    def test_known_two_way_split(self):
        # exp(9) / (exp(9) + exp(1)) for values {0.9, 0.1} at tau 0.1
        p = boltzmann_probabilities([0.9, 0.1], tau=0.1)
        expected = math.exp(9) / (math.exp(9) + math.exp(1))
        assert abs(p[0] - expected) < 1e-12

    @settings(max_examples=200, deadline=None)
    @given(
        values=st.lists(
            st.floats(min_value=-1.0, max_value=1.0, allow_nan=False),
            min_size=1,
            max_size=8,
        )
    )
    def test_sums_to_one_and_argmax_invariant(self, values):
        probs = boltzmann_probabilities(values, tau=0.1)
        assert abs(sum(probs) - 1.0) < 1e-12
        assert all(p > 0 for p in probs)
        # the best value always attains the top selection probability
        assert probs[values.index(max(values))] == max(probs)

    def test_empirical_frequencies_match(self):
        # frozen seed; 3-sigma multinomial check on 1e5 draws
        table = QTable(2, [10, 20], init=0.5)
        table.set(1, 10, 0.9)
        table.set(1, 20, 0.1)
        rng = random.Random(99)
        n = 100_000
        hits = {10: 0, 20: 0}
        for _ in range(n):
            hits[select_neighbor(table, 1, [10, 20], None, 0.1, rng)] += 1
        p = math.exp(9) / (math.exp(9) + math.exp(1))
        sigma = math.sqrt(p * (1 - p) * n)
        assert abs(hits[10] - p * n) <= 3 * sigma


class TestSelectNeighbor:
    def test_single_eligible_always_chosen(self):
        table = QTable(3, [1, 2], init=0.5)
        rng = random.Random(0)
        for _ in range(50):
            assert select_neighbor(table, 2, [1, 2], exclude=2, tau=0.1, rng=rng) == 1

    def test_empty_eligible_returns_none(self):
        table = QTable(3, [1], init=0.5)
        assert select_neighbor(table, 2, [1], exclude=1, tau=0.1, rng=random.Random(0)) is None

    def test_exclusion_respected(self):
        table = QTable(4, [1, 2, 3], init=0.5)
        rng = random.Random(1)
        picks = {select_neighbor(table, 0, [1, 2, 3], exclude=2, tau=0.1, rng=rng) for _ in range(200)}
        assert 2 not in picks
        assert picks == {1, 3}


class TestUpdateQ:
    def test_worked_example(self):
        table = QTable(1, [0], init=0.5)
        update_q(table, 0, 0, reward=1.0, alpha=0.03)
        assert table.get(0, 0) == pytest.approx(0.515, abs=1e-15)

    def test_fixed_point(self):
        table = QTable(1, [0], init=0.37)
        update_q(table, 0, 0, reward=0.37, alpha=0.03)
        assert table.get(0, 0) == pytest.approx(0.37, abs=1e-15)

    def test_contraction_closed_form(self):
        # |Q_n - r| = (1-alpha)^n |Q_0 - r| within 1e-10 over n <= 1000
        alpha, r, q0 = 0.03, -0.25, 0.5
        table = QTable(1, [0], init=q0)
        for n in range(1, 1001):
            update_q(table, 0, 0, reward=r, alpha=alpha)
            expected = (1 - alpha) ** n * abs(q0 - r)
            assert abs(abs(table.get(0, 0) - r) - expected) < 1e-10

    def test_clamping(self):
        table = QTable(1, [0], init=-0.999)
        update_q(table, 0, 0, reward=-1.0, alpha=1.0)
        assert table.get(0, 0) == -1.0
        table2 = QTable(1, [0], init=0.999)
        update_q(table2, 0, 0, reward=1.0, alpha=1.0)
        assert table2.get(0, 0) == 1.0


class TestRewards:
    def test_average_example(self):
        assert reward_ptc_a([0.5, 0.3, 0.8], 3) == pytest.approx(1.6 / 3, abs=1e-15)

    def test_average_identity(self):
        assert reward_ptc_a([1.0, 1.0, 1.0], 3) == 1.0

    def test_average_matches_independent_sum(self):
        rng = random.Random(7)
        for _ in range(100):
            states = [rng.random() for _ in range(6)]
            total = 0.0
            for s in states:
                total += s
            assert abs(reward_ptc_a(states, 6) - total / 6) < 1e-12

    def test_minimum_example(self):
        assert reward_ptc_m([0.5, 0.3, 0.8]) == 0.3

    def test_minimum_singleton(self):
        assert reward_ptc_m([0.7]) == 0.7

    def test_min_never_exceeds_average(self):
        rng = random.Random(13)
        for _ in range(10_000):
            states = [rng.random() for _ in range(rng.randint(1, 10))]
            assert reward_ptc_m(states) <= reward_ptc_a(states, len(states)) + 1e-15

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            reward_ptc_a([], 0)
        with pytest.raises(ValueError):
            reward_ptc_m([])

    def test_hop_mismatch_rejected(self):
        with pytest.raises(ValueError):
            reward_ptc_a([0.5, 0.5], 3)


class TestQrFeedback:
    def test_state_dominates(self):
        table = QTable(2, [5, 6], init=0.5)
        table.set(1, 5, 0.9)
        assert qr_feedback(0.2, table, 1, [5, 6]) == 0.2

    def test_best_estimate_dominates(self):
        table = QTable(2, [5, 6], init=0.5)
        table.set(1, 5, 0.4)
        table.set(1, 6, 0.6)
        assert qr_feedback(1.0, table, 1, [5, 6]) == 0.6

    def test_matches_bruteforce(self):
        rng = random.Random(3)
        for _ in range(200):
            nbs = list(range(rng.randint(1, 6)))
            table = QTable(1, nbs, init=0.0)
            for nb in nbs:
                table.set(0, nb, rng.uniform(-1, 1))
            state = rng.random()
            best = max(table.get(0, nb) for nb in nbs)
            assert qr_feedback(state, table, 0, nbs) == min(state, best)


class TestPenalty:
    def test_at_detection(self):
        assert compute_penalty(0) == pytest.approx(-0.9, abs=1e-15)

    def test_one_back(self):
        assert compute_penalty(1) == pytest.approx(-0.81, abs=1e-15)

    def test_decay_and_range(self):
        prev = None
        for x in range(21):
            p = compute_penalty(x)
            assert -1.0 < p < 0.0
            if prev is not None:
                assert abs(p) < abs(prev)
            prev = p

    def test_negative_distance_rejected(self):
        with pytest.raises(ValueError):
            compute_penalty(-1)


class TestLinkUsage:
    def test_cold_monitor_reads_low(self):
        mon = LinkUsageMonitor([1, 2], window=100, threshold=5.0)
        assert tpot_feature(mon, 1) == "low"
        assert mon.mean_usage(1) == 0.0

    def test_constant_usage_above_threshold(self):
        mon = LinkUsageMonitor([1], window=100, threshold=5.0)
        for _ in range(100):
            mon.record({1: 6})
        assert mon.mean_usage(1) == pytest.approx(6.0)
        assert tpot_feature(mon, 1) == "high"

    def test_exact_threshold_is_low(self):
        mon = LinkUsageMonitor([1], window=100, threshold=5.0)
        for _ in range(100):
            mon.record({1: 5})
        assert mon.mean_usage(1) == pytest.approx(5.0)
        assert tpot_feature(mon, 1) == "low"

    def test_window_slides(self):
        mon = LinkUsageMonitor([1], window=4, threshold=5.0)
        for v in (8, 8, 8, 8):
            mon.record({1: v})
        assert mon.mean_usage(1) == 8.0
        for _ in range(4):
            mon.record({})
        assert mon.mean_usage(1) == 0.0
        assert tpot_feature(mon, 1) == "low"

    def test_partial_window_mean(self):
        mon = LinkUsageMonitor([1], window=10, threshold=5.0)
        mon.record({1: 10})
        # nine cold slots remain in the window
        assert mon.mean_usage(1) == pytest.approx(1.0)
