"""Tests for the ground-truth traffic simulator."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from errors import DataError, InfeasibleTopologyError
from operators import numerical_rank
from simulator import (
    anomaly_shape,
    deterministic_matrix,
    generate,
    gravity_means,
    inject_anomalies,
    preset_scenario,
    preset_scenarios,
)
from traffic_models import AnomalyShape, AnomalyType, Scenario, ScenarioPreset

SMALL = Scenario(n_nodes=6, T=512)


def test_gravity_means_sum_and_structure():
    means = gravity_means(12, 1e6, np.random.default_rng(0))
    assert means.shape == (144,)
    assert np.all(means > 0)
    assert math.isclose(float(means.sum()), 1e6, rel_tol=1e-9)
    assert numerical_rank(means.reshape(12, 12)) == 1, "gravity means must be an outer product"


def test_gravity_means_with_given_weights():
    means = gravity_means(2, 10.0, np.random.default_rng(0), weights=np.array([1.0, 3.0]))
    assert np.allclose(means, np.array([1.0, 3.0, 3.0, 9.0]) * 10.0 / 16.0)


def test_deterministic_matrix_rank_and_mean():
    rng = np.random.default_rng(1)
    means = gravity_means(12, 1e6, rng)
    A = deterministic_matrix(means, 2016, rng)
    assert A.shape == (2016, 144)
    assert np.all(A >= 0)
    assert numerical_rank(A) <= 11
    # whole cycles over the horizon average out
    assert np.allclose(A.mean(axis=0), means, rtol=1e-10)


def test_deterministic_matrix_rejects_odd_length():
    with pytest.raises(DataError):
        deterministic_matrix(np.ones(4), 15, np.random.default_rng(0))


def test_anomaly_shapes_peak_at_one():
    assert np.array_equal(anomaly_shape(AnomalyShape.IMPULSE, 3), [1.0, 0.0, 0.0])
    assert np.array_equal(anomaly_shape(AnomalyShape.STEP, 4), np.ones(4))

    symmetric = anomaly_shape(AnomalyShape.SYMMETRIC_TRIANGLE, 6)
    assert symmetric.max() == 1.0
    assert np.allclose(symmetric, symmetric[::-1])

    asymmetric = anomaly_shape(AnomalyShape.ASYMMETRIC_TRIANGLE, 30)
    assert asymmetric.max() == 1.0
    assert int(np.argmax(asymmetric)) == 9, "flash crowds rise over the first third"
    assert np.all(np.diff(asymmetric[:10]) > 0) and np.all(np.diff(asymmetric[9:]) < 0)

    with pytest.raises(DataError):
        anomaly_shape(AnomalyShape.STEP, 0)


def test_generate_is_additive_and_deterministic():
    scenario = preset_scenario(ScenarioPreset.ALPHA, 0.05, SMALL, seed=3)
    first = generate(scenario)
    second = generate(scenario)
    assert np.array_equal(first.X, first.A + first.E + first.N)
    assert np.array_equal(first.X, second.X), "same seed must give the same matrix"
    other = generate(scenario.model_copy(update={"seed": 4}))
    assert not np.array_equal(first.X, other.X)


def test_alpha_events():
    truth = generate(preset_scenario(ScenarioPreset.ALPHA, 0.05, SMALL))
    assert len(truth.events) == 500
    assert np.all(truth.E >= 0)
    covered = np.zeros_like(truth.E, dtype=bool)
    for event in truth.events:
        assert event.duration == 6 and event.shape == AnomalyShape.STEP
        (flow,) = event.flows
        assert event.peaks[0] == pytest.approx(0.5 * truth.means[flow])
        covered[event.start : event.end, flow] = True
    assert not np.any(truth.E[~covered]), "anomaly mass outside any event window"


def test_random_point_count():
    truth = generate(preset_scenario(ScenarioPreset.RANDOM, 0.05, SMALL))
    assert len(truth.events) == math.floor(0.01 * 512 * 36)
    assert all(event.duration == 1 for event in truth.events)


def test_ddos_fan_in():
    truth = generate(preset_scenario(ScenarioPreset.DDOS, 0.05, SMALL))
    assert len(truth.events) == 100
    for event in truth.events:
        sources = {flow // 6 for flow in event.flows}
        destinations = {flow % 6 for flow in event.flows}
        assert len(event.flows) == 5 and len(sources) == 5
        assert len(destinations) == 1
        assert not sources & destinations, "a DDoS source cannot be its own target"


def test_shift_conserves_traffic():
    truth = generate(preset_scenario(ScenarioPreset.SHIFT, 0.05, SMALL))
    assert len(truth.events) == 10
    for event in truth.events:
        donor, recipient = event.flows
        assert event.donor_flow == donor
        assert donor // 6 != recipient // 6 and donor % 6 != recipient % 6
    total = float(np.abs(truth.E).sum())
    assert abs(float(truth.E.sum())) <= 1e-9 * total, "shift must move traffic, not create it"


def test_noise_scale_follows_alpha():
    truth = generate(SMALL.model_copy(update={"noise_alpha": 0.1, "T": 2016}))
    assert np.allclose(truth.sigmas, 0.1 * truth.means)
    assert np.allclose(truth.N.std(axis=0), truth.sigmas, rtol=0.15)


def test_infeasible_fan_in():
    scenario = Scenario(anomaly_type=AnomalyType.DDOS, anomaly_count=1, fan_in=5)
    A = np.ones((64, 9))
    with pytest.raises(InfeasibleTopologyError):
        inject_anomalies(scenario, A, np.ones(9), np.random.default_rng(0))


def test_scenario_validation():
    with pytest.raises(ValidationError):
        Scenario(T=2017)
    with pytest.raises(ValidationError):
        Scenario(anomaly_type=AnomalyType.ALPHA)
    with pytest.raises(ValidationError):
        Scenario(n_nodes=4, anomaly_type=AnomalyType.DDOS, anomaly_count=1, fan_in=5)


def test_preset_scenarios():
    scenarios = preset_scenarios(0.1)
    assert [s.label for s in scenarios] == [
        "X_random", "X_alpha", "X_DoS", "X_DDoS", "X_flash", "X_shift",
    ]
    assert all(s.noise_alpha == 0.1 and s.anomaly_delta == 0.5 for s in scenarios)
    assert scenarios[3].fan_in == 5 and scenarios[4].fan_in == 3


if __name__ == "__main__":
    test_gravity_means_sum_and_structure()
    test_shift_conserves_traffic()
    print("✅ Simulator tests passed!")
