import math

import numpy as np
import pytest
from scipy.integrate import quad

from wsnloc.exceptions import ContractError, DomainError, InvalidConfigError
from wsnloc.propagation import (
    PathLossParams,
    SensorParams,
    absence_density,
    detection_probability,
    energy_per_sample,
    false_alarm_probability,
    presence_density,
    rssi_at,
    sensor_decide,
    simulate_decisions,
    simulate_samples,
)

P = SensorParams(e_t0_sq=4.0, sigma_n_sq=1.0, m_samples=1, threshold=2.0)


def test_energy_per_sample_examples():
    assert energy_per_sample(1, P) == 4
    assert energy_per_sample(2, P) == 1
    assert 0 < energy_per_sample(1e6, P) < 1e-11


@pytest.mark.parametrize("d", [1e-3, 0.5, 1.0, 7.3, 1e4])
def test_energy_per_sample_inverse_square(d):
    assert energy_per_sample(d, P) * d**2 == pytest.approx(P.e_t0_sq, rel=1e-12)


@pytest.mark.parametrize("d", [0.0, -1.0])
def test_energy_per_sample_domain(d):
    with pytest.raises(DomainError):
        energy_per_sample(d, P)


def test_rssi_deterministic_examples():
    radio = PathLossParams(-40, 2, 0)
    assert rssi_at(1, radio) == -40
    assert rssi_at(10, radio) == pytest.approx(-60)
    assert rssi_at(0.0, radio) == rssi_at(0.01, radio)


def test_rssi_monotone_without_shadowing():
    d = np.linspace(0.02, 50, 500)
    r = rssi_at(d, PathLossParams(-40, 2.7, 0))
    assert np.all(np.diff(r) < 0)


def test_rssi_shadowing_mean():
    rng = np.random.default_rng(0)
    draws = rssi_at(np.full(100_000, 10.0), PathLossParams(-40, 2, 4), rng)
    assert abs(draws.mean() - (-60)) < 0.1
    assert draws.std() == pytest.approx(4, rel=0.02)


def test_params_validation():
    with pytest.raises(InvalidConfigError):
        PathLossParams(-40, 0, 0)
    with pytest.raises(InvalidConfigError):
        SensorParams(m_samples=0)
    with pytest.raises(InvalidConfigError):
        SensorParams(sigma_n_sq=0)


def test_detection_zero_threshold_always_fires():
    p = SensorParams(4, 1, 3, 0.0)
    for d in (0.1, 1, 100):
        assert detection_probability(d, p) == 1.0


def test_detection_far_limit_is_false_alarm():
    p = SensorParams(4, 1, 3, 2.5)
    assert detection_probability(1e6, p) == pytest.approx(false_alarm_probability(p), abs=1e-9)


def test_detection_matches_quadrature():
    # P[y^2 > 2] for y ~ N(0, 1 + 4/1^2), integrated numerically
    var = 1 + 4 / 1**2
    pdf = lambda y: math.exp(-y * y / (2 * var)) / math.sqrt(2 * math.pi * var)
    expected = 2 * quad(pdf, math.sqrt(2), math.inf, epsabs=1e-13)[0]
    assert expected == pytest.approx(0.527089256865538, abs=1e-12)
    assert detection_probability(1, P) == pytest.approx(expected, abs=1e-6)


def test_detection_monotone_and_bounded():
    p = SensorParams(9, 1, 4, 2.0)
    d = np.linspace(0.05, 30, 400)
    pd = detection_probability(d, p)
    assert np.all(np.diff(pd) <= 1e-15)
    assert np.all(pd >= false_alarm_probability(p) - 1e-15) and np.all(pd <= 1)


@pytest.mark.parametrize("d", [0.5, 1.0, 3.0])
def test_densities_integrate_to_one(d):
    assert quad(lambda y: presence_density(y, d, P), -np.inf, np.inf)[0] == pytest.approx(1, abs=1e-6)
    assert quad(lambda y: absence_density(y, P), -np.inf, np.inf)[0] == pytest.approx(1, abs=1e-6)


def test_sensor_decide_examples():
    assert sensor_decide([0.0], SensorParams(threshold=1.0)) == 0
    assert sensor_decide([math.sqrt(5)], SensorParams(threshold=1.0)) == 1
    p3 = SensorParams(m_samples=3, threshold=1.0)
    assert sensor_decide([0.0, 0.0, math.sqrt(15)], p3) == 1


def test_sensor_decide_sample_count():
    with pytest.raises(ContractError):
        sensor_decide([1.0, 2.0], P)


@pytest.mark.parametrize("m", [1, 4])
def test_firing_rate_matches_detection_probability(m):
    p = SensorParams(4, 1, m, 2.0)
    rng = np.random.default_rng(m)
    samples = simulate_samples(np.full(100_000, 1.0), p, rng)
    rate = np.mean([sensor_decide(s, p) for s in samples[:2000]])
    vec_rate = simulate_decisions(np.full(100_000, 1.0), p, rng).mean()
    assert abs(vec_rate - detection_probability(1.0, p)) < 0.01
    assert abs(rate - detection_probability(1.0, p)) < 0.05


def test_absent_firing_rate_is_false_alarm():
    p = SensorParams(4, 1, 2, 1.5)
    rate = simulate_decisions(np.ones(100_000), p, np.random.default_rng(1), present=False).mean()
    assert abs(rate - false_alarm_probability(p)) < 0.01
