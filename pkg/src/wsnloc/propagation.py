"""RSSI generation and the energy-detector sensor model.

The detector statistic is the mean of ``M`` squared received samples. Under
target absence each sample is N(0, sigma_n_sq); under presence at distance d it
is N(0, sigma_n_sq + e_t0_sq / d**2). ``M * statistic / variance`` is therefore
chi-square with ``M`` degrees of freedom, which gives detection and false-alarm
probabilities in closed form.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._validation import check_count, check_nonnegative, check_positive, check_rng
from .exceptions import ContractError, DomainError

D_MIN = 0.01


@dataclass(frozen=True)
class PathLossParams:
    ref_power: float = -40.0
    exponent: float = 2.0
    shadow_sigma: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.ref_power):
            raise DomainError("ref_power must be finite")
        check_positive(self.exponent, "exponent")
        check_nonnegative(self.shadow_sigma, "shadow_sigma")


@dataclass(frozen=True)
class SensorParams:
    e_t0_sq: float = 4.0
    sigma_n_sq: float = 1.0
    m_samples: int = 1
    threshold: float = 2.0

    def __post_init__(self):
        check_positive(self.e_t0_sq, "e_t0_sq")
        check_positive(self.sigma_n_sq, "sigma_n_sq")
        check_count(self.m_samples, "m_samples", minimum=1)
        check_nonnegative(self.threshold, "threshold")


@dataclass(frozen=True)
class RssiReading:
    source_id: int
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DomainError("RSSI value must be finite")


def _check_distance(d):
    d = np.asarray(d, dtype=float)
    if np.any(~(d > 0)):
        raise DomainError("distance must be > 0")
    return d


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def energy_per_sample(d, params):
    """Received target energy per sample, ``e_t0_sq / d**2``."""
    d = _check_distance(d)
    return _scalar_or_array(params.e_t0_sq / d**2)


def rssi_at(d, params, rng=None):
    """Log-distance path loss with Gaussian shadowing, in dBm.

    Distances below ``D_MIN`` are clamped to it.
    """
    d = np.maximum(np.asarray(d, dtype=float), D_MIN)
    mean = params.ref_power - 10.0 * params.exponent * np.log10(d)
    if params.shadow_sigma > 0:
        mean = mean + check_rng(rng).normal(0.0, params.shadow_sigma, size=np.shape(d))
    return _scalar_or_array(mean)


def sample_variance(d, params, present=True):
    """Per-sample variance under presence (at distance ``d``) or absence."""
    if not present:
        return params.sigma_n_sq
    return params.sigma_n_sq + energy_per_sample(d, params)


def _tail(variance, params):
    m = params.m_samples
    return stats.chi2.sf(m * params.threshold / variance, df=m)


def false_alarm_probability(params):
    """Probability the detector fires when only noise is received."""
    return float(_tail(params.sigma_n_sq, params))


def detection_probability(d, params):
    """Probability the detector fires with the target at distance ``d``."""
    var = sample_variance(_check_distance(d), params)
    return _scalar_or_array(_tail(var, params))


def presence_density(y, d, params):
    """Density of one received sample ``y`` with the target at distance ``d``."""
    var = sample_variance(_check_distance(d), params)
    return stats.norm.pdf(y, scale=np.sqrt(var))


def absence_density(y, params):
    """Density of one received sample ``y`` when the target is absent."""
    return stats.norm.pdf(y, scale=math.sqrt(params.sigma_n_sq))


def sensor_decide(samples, params):
    """Binary energy test over exactly ``m_samples`` received samples."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size != params.m_samples:
        raise ContractError(f"expected {params.m_samples} samples, got {samples.size}")
    return int(np.mean(samples**2) > params.threshold)


def simulate_samples(d, params, rng, present=True):
    """Draw ``m_samples`` received samples for each distance in ``d``.

    Returns an array of shape ``np.shape(d) + (m_samples,)``.
    """
    rng = check_rng(rng)
    if present:
        var = np.asarray(sample_variance(_check_distance(d), params), dtype=float)
    else:
        var = np.full(np.shape(d), params.sigma_n_sq)
    shape = np.shape(var) + (params.m_samples,)
    return rng.normal(size=shape) * np.sqrt(var)[..., None]


def simulate_decisions(d, params, rng, present=True):
    """Vectorized ``sensor_decide`` applied to freshly simulated samples."""
    samples = simulate_samples(d, params, rng, present=present)
    return (np.mean(samples**2, axis=-1) > params.threshold).astype(int)


def rssi_matrix(points_a, points_b, params, rng=None):
    """RSSI (dBm) for every pair ``(points_a[i], points_b[j])``."""
    a = np.asarray(points_a, dtype=float)
    b = np.asarray(points_b, dtype=float)
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1))
    return np.asarray(rssi_at(d, params, rng)).reshape(d.shape)
