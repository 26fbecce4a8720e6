"""Tests for the verification battery at small, fast sizes."""

import math

import numpy as np
import pytest

from pifnet.analysis.verification import (
    _histogram_distance,
    bridge_monotonicity,
    divergence_check,
    dominance_check,
    empirical_rate_check,
    fluid_deviation,
    renewal_rate_estimate,
    return_time_estimate,
    spike_rate_window_check,
    tv_diagnostic,
)
from pifnet.core.errors import ParameterError, PreconditionError
from pifnet.core.models import Law, LevySpec, NetworkConfig

from conftest import explicit_network


class TestDominance:
    """Tests for the coupled comparison with the decoupled network."""

    def test_single_neuron_is_identical(self):
        """With one neuron the coupled and decoupled runs coincide."""
        config = NetworkConfig.symmetric(1, 2.0, 1.0, 1.0, sigma=0.7)
        result = dominance_check(config, None, 50.0, dt=0.01, replicas=2, seed=1)
        assert result.statistic == 1.0
        assert result.passed

    def test_symmetric_triple(self, noisy_triple: NetworkConfig):
        """No replica of the symmetric triple should violate dominance."""
        result = dominance_check(noisy_triple, [2.0, 2.0, 2.0], 50.0, dt=0.01, replicas=4, seed=2)
        assert result.statistic == 1.0
        assert result.details["violating_replicas"] == []

    def test_strong_inhibition(self):
        """Strong inhibition should only widen the gap to the decoupled counts."""
        config = explicit_network([[2.0, 10.0], [10.0, 2.0]], sigma=0.5)
        result = dominance_check(config, [1.0, 1.0], 50.0, dt=0.01, replicas=3, seed=3)
        assert result.passed
        full, free = result.details["mean_spikes"], result.details["mean_spikes_decoupled"]
        assert all(a <= b for a, b in zip(full, free))

    def test_weak_coupling(self):
        """Cross-signals of 1e-4 should still give dominance in every replica."""
        config = explicit_network([[2.0, 1e-4], [1e-4, 2.0]], sigma=0.5)
        result = dominance_check(config, [1.0, 1.0], 100.0, dt=0.01, replicas=8, seed=7)
        assert result.statistic == 1.0
        assert result.details["first_violation_times"] == []

    def test_worker_count_does_not_change_result(self, noisy_triple: NetworkConfig):
        """Pooled replicas should give the same result as serial ones."""
        serial = dominance_check(noisy_triple, None, 20.0, dt=0.01, replicas=3, seed=4)
        pooled = dominance_check(noisy_triple, None, 20.0, dt=0.01, replicas=3, seed=4, workers=2)
        assert serial.to_dict() == pooled.to_dict()

    def test_rejects_zero_replicas(self, noisy_triple: NetworkConfig):
        """At least one replica is needed."""
        with pytest.raises(ParameterError):
            dominance_check(noisy_triple, None, 10.0, dt=0.01, replicas=0, seed=4)


class TestRenewalRate:
    """Tests for the lone-neuron spike rate."""

    def test_deterministic_cycle(self):
        """Without noise the rate is exactly nu / b."""
        result = renewal_rate_estimate(LevySpec(nu=1.0), Law.constant(2.0), 2000.0, dt=0.5, replicas=1, seed=0)
        assert result.details["target"] == 0.5
        assert result.statistic == pytest.approx(0.0, abs=1e-12)
        assert result.passed

    def test_ratio_only(self):
        """Only the ratio nu / b should matter for the target."""
        result = renewal_rate_estimate(LevySpec(nu=2.0), Law.constant(4.0), 2000.0, dt=0.5, replicas=1, seed=0)
        assert result.details["target"] == 0.5
        assert result.passed

    def test_horizon_guard(self):
        """Horizons shorter than a thousand expected spikes should be refused."""
        with pytest.raises(PreconditionError):
            renewal_rate_estimate(LevySpec(nu=1.0), Law.constant(2.0), 100.0, dt=0.5, replicas=1, seed=0)


class TestEmpiricalRate:
    """Tests for steady spike rates."""

    def test_deterministic_single_neuron(self, single_neuron: NetworkConfig):
        """Without noise the measured rate equals nu / b exactly."""
        result = empirical_rate_check(single_neuron, 1000.0, burn_in=100.0, dt=0.5, replicas=1, seed=0)
        assert result.details["expected"] == pytest.approx([0.5])
        assert result.statistic == pytest.approx(0.0, abs=1e-12)

    def test_unstable_rejected(self, counterexample_network: NetworkConfig):
        """Steady rates only make sense under a stable verdict."""
        with pytest.raises(PreconditionError):
            empirical_rate_check(counterexample_network, 100.0, dt=0.01, replicas=1, seed=0)

    def test_burn_in_range(self, single_neuron: NetworkConfig):
        """burn_in must leave part of the horizon to measure."""
        with pytest.raises(ParameterError):
            empirical_rate_check(single_neuron, 100.0, burn_in=100.0, dt=0.5, replicas=1, seed=0)


class TestDivergence:
    """Tests for growth of the escaping coordinate."""

    def test_counterexample_third_neuron_grows(self, counterexample_network: NetworkConfig):
        """Neuron 3 should escape at the fluid slope 0.2."""
        result = divergence_check(counterexample_network, 1000.0, dt=0.05, replicas=1, seed=5)
        assert result.details["mode"] == "growth"
        assert result.details["witness"] == [1, 2]
        assert result.details["neuron"] == 3
        assert result.details["predicted_slope"] == pytest.approx(0.2)
        assert result.passed

    def test_stable_control(self, noisy_triple: NetworkConfig):
        """A stable network runs in control mode and stays bounded."""
        result = divergence_check(noisy_triple, 200.0, dt=0.05, replicas=1, seed=6)
        assert result.details["mode"] == "control"
        assert result.passed


class TestFluidScale:
    """Tests for the scaled process against the fluid path."""

    def test_deterministic_pair(self, pair: NetworkConfig):
        """Without noise only the reset granularity separates the two."""
        result = fluid_deviation(pair, [0.5, 0.5], 1000.0, dt=0.05, seed=0)
        assert result.details["emptied_at"] == pytest.approx(0.5)
        assert result.statistic <= 2 * 2.0 / 1000.0 + 1e-9
        assert result.passed

    def test_scale_guard(self, pair: NetworkConfig):
        """Scales too small for the fluid limit should be refused."""
        with pytest.raises(PreconditionError):
            fluid_deviation(pair, [0.5, 0.5], 10.0, dt=0.05, seed=0)

    def test_zero_direction_rejected(self, pair: NetworkConfig):
        """A zero start gives no fluid direction."""
        with pytest.raises(PreconditionError):
            fluid_deviation(pair, [0.0, 0.0], 1000.0, dt=0.05, seed=0)

    def test_diverging_fluid_rejected(self, counterexample_network: NetworkConfig):
        """A diverging fluid path has no emptying time to compare against."""
        with pytest.raises(PreconditionError):
            fluid_deviation(counterexample_network, [0.0, 0.0, 1.0], 1000.0, dt=0.05, seed=0)

    def test_window_single_neuron(self, single_neuron: NetworkConfig):
        """A lone neuron fires at nu / b inside any long window."""
        result = spike_rate_window_check(single_neuron, [1.0], 1000.0, 2.0, dt=0.5, seed=0)
        assert result.details["window_start"] == pytest.approx(1.25)
        assert result.details["observed"] == pytest.approx([0.5])
        assert result.passed

    def test_window_too_short(self, single_neuron: NetworkConfig):
        """Windows too short for ten expected spikes should be refused."""
        with pytest.raises(PreconditionError):
            spike_rate_window_check(single_neuron, [1.0], 1000.0, 0.001, dt=0.5, seed=0)

    def test_window_before_bound(self, pair: NetworkConfig):
        """The window must start after the symmetric emptying bound of 3."""
        with pytest.raises(PreconditionError):
            spike_rate_window_check(pair, [0.5, 0.5], 1000.0, 2.0, t=2.0, dt=0.5, seed=0)


class TestReturnTime:
    """Tests for recurrence to a ball around 0."""

    def test_start_inside(self, single_neuron: NetworkConfig):
        """A start inside the ball should return at the first step after epsilon."""
        result = return_time_estimate(single_neuron, 5.0, 0.01, dt=0.01, replicas=2, seed=0, starts=[[1.0]])
        assert result.statistic == pytest.approx(0.01)
        assert result.details["capped"] == 0
        assert result.passed

    def test_sphere_starts(self, noisy_triple: NetworkConfig):
        """Starts on the sphere of radius 20 should all come back after epsilon."""
        result = return_time_estimate(noisy_triple, 20.0, dt=0.01, replicas=3, seed=1)
        assert result.passed
        assert all(t is not None and t >= 0.01 for t in result.details["times"])

    def test_cap_fails(self, counterexample_network: NetworkConfig):
        """Runs that never enter the ball fail the check instead of raising."""
        result = return_time_estimate(counterexample_network, 1.0, dt=0.01, replicas=2, seed=2,
                                      starts=[[10.0, 10.0, 10.0]], max_steps=100)
        assert not result.passed
        assert result.details["capped"] == 2
        assert result.statistic == pytest.approx(1.0)


class TestBridgeMonotonicity:
    """Tests for survival of a drifted Brownian bridge."""

    def test_nondecreasing(self):
        """Survival should rise with the endpoint and match the closed form at x=0."""
        result = bridge_monotonicity(0.5, 1.0, 1.0, [-1.0, 0.0, 1.0, 2.0], replicas=10_000, seed=0)
        assert result.passed
        p, closed, se = result.details["p"], result.details["closed_form"], result.details["stderr"]
        assert closed[1] == pytest.approx(1 - math.exp(-0.5))
        assert abs(p[1] - closed[1]) <= 4 * se[1] + 1e-3

    def test_unreachable_barrier(self):
        """A barrier far below the bridge should never be reached."""
        result = bridge_monotonicity(10.0, 1.0, 1.0, [-1.0, 0.0, 1.0], replicas=10_000, seed=1)
        assert all(p == pytest.approx(1.0, abs=1e-6) for p in result.details["p"])

    def test_replica_guard(self):
        """Too few replicas per point should be refused."""
        with pytest.raises(PreconditionError):
            bridge_monotonicity(0.5, 1.0, 1.0, [0.0, 1.0], replicas=100, seed=0)

    def test_grid_guard(self):
        """The x grid must be increasing."""
        with pytest.raises(PreconditionError):
            bridge_monotonicity(0.5, 1.0, 1.0, [1.0, 0.0], replicas=10_000, seed=0)


class TestTotalVariation:
    """Tests for the heuristic decay diagnostic."""

    def test_unstable_rejected(self, counterexample_network: NetworkConfig):
        """A partial-risk configuration has no limit law to converge to."""
        with pytest.raises(PreconditionError):
            tv_diagnostic(counterexample_network, [1.0] * 3, [5.0] * 3, 10.0, dt=0.05, replicas=4, seed=0)

    def test_needs_two_replicas(self, noisy_triple: NetworkConfig):
        """Two replicas are the least that can give a histogram per start."""
        with pytest.raises(ParameterError):
            tv_diagnostic(noisy_triple, [1.0] * 3, [5.0] * 3, 10.0, dt=0.05, replicas=1, seed=0)

    def test_reproducible_and_labelled(self):
        """Same seed, same payload; the result is flagged as heuristic and respects its pass rule."""
        noisy = NetworkConfig.symmetric(2, 2.0, 1.0, 1.0, sigma=0.5)
        first = tv_diagnostic(noisy, [2.0, 2.0], [10.0, 10.0], 20.0, dt=0.05, replicas=20, seed=3, bins=5)
        second = tv_diagnostic(noisy, [2.0, 2.0], [10.0, 10.0], 20.0, dt=0.05, replicas=20, seed=3, bins=5)
        assert first.to_dict() == second.to_dict()
        assert first.details["heuristic"] is True
        assert first.details["early_time"] == pytest.approx(5.0)
        assert 0.0 <= first.statistic <= 2.0
        assert first.passed == (
            first.statistic < 0.1
            and (first.details["decreased"] or first.details["early_at_noise_floor"])
        )

    def test_disjoint_samples_are_two_apart(self):
        """The distance is the full L1 distance, so disjoint histograms sit at 2."""
        a = np.zeros((50, 1))
        b = np.ones((50, 1))
        assert _histogram_distance(a, b, 50) == pytest.approx(2.0)

    def test_identical_samples_are_zero_apart(self):
        """Equal samples should have distance 0."""
        a = np.linspace(0.0, 1.0, 40).reshape(-1, 2)
        assert _histogram_distance(a, a.copy(), 10) == 0.0

    def test_worst_coordinate_counts(self):
        """Only the coordinate that differs should set the distance."""
        a = np.column_stack([np.zeros(10), np.arange(10.0)])
        b = np.column_stack([np.zeros(10), np.arange(10.0) + 100.0])
        assert _histogram_distance(a, b, 4) == pytest.approx(2.0)
