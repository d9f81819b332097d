"""Recursive Bayesian trackers over binary proximity sensors.

Particles are stored column-wise in numpy arrays rather than as a list of
objects; :attr:`ParticleSet.particles` still yields :class:`Particle` values for
inspection.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import SUM_TOL, check_nonnegative, check_points, check_probability, check_rng
from .exceptions import ContractError, DegenerateUpdateError, InvalidConfigError, NumericalError
from .propagation import D_MIN, SensorParams, detection_probability, false_alarm_probability
from .world import Position

# ---------------------------------------------------------------- target model


@dataclass(frozen=True)
class TargetModelParams:
    p_init: float = 0.1
    p_out: float = 0.0
    motion_step_sigma: float = 0.3

    def __post_init__(self):
        check_probability(self.p_init, "p_init")
        check_probability(self.p_out, "p_out")
        check_nonnegative(self.motion_step_sigma, "motion_step_sigma")


@dataclass(frozen=True)
class TargetState:
    present: int
    pos: Position
    vel: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.present not in (0, 1):
            raise ContractError("present must be 0 or 1")


def _advance(present, xy, vel, params, rng):
    """Vectorized presence flip plus random-walk motion for present targets."""
    u = rng.random(len(present))
    new_present = np.where(present == 0, u < params.p_init, u >= params.p_out).astype(int)
    noise = rng.normal(0.0, params.motion_step_sigma, size=xy.shape) if params.motion_step_sigma > 0 else 0.0
    moved = xy + vel + noise
    new_xy = np.where(new_present[:, None] == 1, moved, xy)
    return new_present, new_xy


def target_step(state, params, rng):
    """Advance one target state through the binary Markov presence model."""
    rng = check_rng(rng)
    present, xy = _advance(
        np.array([state.present]),
        np.array([[state.pos.x, state.pos.y]]),
        np.asarray(state.vel, dtype=float),
        params,
        rng,
    )
    return TargetState(int(present[0]), Position(xy[0, 0], xy[0, 1], state.pos.z), state.vel)


# ----------------------------------------------------------- observation model


@dataclass(frozen=True)
class ObservationVector:
    step: int
    decisions: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(v not in (0, 1) for v in self.decisions.values()):
            raise ContractError("decisions must be 0 or 1")


def _sensor_table(sensors):
    if isinstance(sensors, dict):
        return dict(sensors)
    return {s.id: s.pos for s in sensors}


def _log_binary_likelihood(xy, present, sensor_xy, z, params):
    """Log of prod_i P_D^z_i (1 - P_D)^(1 - z_i) for each hypothesis row.

    ``xy`` is (N, 2), ``sensor_xy`` (S, 2) and ``z`` (S,) with entries in {0, 1}.
    Distances are clamped to ``D_MIN`` so a hypothesis on top of a sensor stays
    finite.
    """
    d = np.sqrt(((xy[:, None, :] - sensor_xy[None, :, :]) ** 2).sum(-1))
    pd = np.asarray(detection_probability(np.maximum(d, D_MIN), params)).reshape(d.shape)
    if present is not None:
        pd = np.where(np.asarray(present)[:, None] == 1, pd, false_alarm_probability(params))
    with np.errstate(divide="ignore"):
        terms = np.where(z[None, :] == 1, np.log(pd), np.log1p(-pd))
    return terms.sum(axis=1)


def obs_likelihood(z, hypo, sensors, params):
    """Probability of the binary decision vector ``z`` under hypothesis ``hypo``."""
    table = _sensor_table(sensors)
    ids = sorted(z.decisions)
    if not ids:
        return 1.0
    sensor_xy = np.array([[table[i].x, table[i].y] for i in ids])
    zz = np.array([z.decisions[i] for i in ids])
    xy = np.array([[hypo.pos.x, hypo.pos.y]])
    return float(np.exp(_log_binary_likelihood(xy, [hypo.present], sensor_xy, zz, params)[0]))


# -------------------------------------------------------------- particle filter


@dataclass(frozen=True)
class Particle:
    state: TargetState
    weight: float


@dataclass(frozen=True)
class ParticleSet:
    """Weighted particle cloud: ``xy`` (N, 2), ``vel`` (N, 2), ``present`` (N,)."""

    xy: np.ndarray
    vel: np.ndarray
    present: np.ndarray
    weights: np.ndarray
    step: int = 0

    def __len__(self):
        return len(self.weights)

    @classmethod
    def at(cls, start, n, rng=None, spread=0.0, present=1):
        """``n`` equally weighted particles around ``start``."""
        xy = np.tile([start.x, start.y], (n, 1)).astype(float)
        if spread > 0:
            xy = xy + check_rng(rng).normal(0.0, spread, size=xy.shape)
        return cls(xy, np.zeros((n, 2)), np.full(n, present, dtype=int), np.full(n, 1.0 / n))

    @property
    def particles(self):
        return [
            Particle(TargetState(int(p), Position(x, y), (vx, vy)), float(w))
            for (x, y), (vx, vy), p, w in zip(self.xy, self.vel, self.present, self.weights)
        ]


def _require_nonempty(ps):
    if len(ps) == 0:
        raise ContractError("particle set is empty")


def pf_predict(ps, params, rng):
    """Propagate every particle through the target model; weights are untouched."""
    _require_nonempty(ps)
    present, xy = _advance(ps.present, ps.xy, ps.vel, params, check_rng(rng))
    return replace(ps, xy=xy, present=present, step=ps.step + 1)


def pf_reweight(ps, log_likelihood):
    """Multiply weights by ``exp(log_likelihood)`` and renormalize."""
    _require_nonempty(ps)
    ll = np.asarray(log_likelihood, dtype=float)
    with np.errstate(divide="ignore"):
        logw = np.log(ps.weights) + ll
    top = logw.max()
    if not np.isfinite(top):
        raise DegenerateUpdateError("every particle has zero likelihood")
    w = np.exp(logw - top)
    return replace(ps, weights=w / w.sum())


def pf_update(ps, z, sensors, params):
    """Bayes update of particle weights with a binary observation vector."""
    table = _sensor_table(sensors)
    ids = sorted(z.decisions)
    if not ids:
        return replace(ps, weights=ps.weights.copy())
    sensor_xy = np.array([[table[i].x, table[i].y] for i in ids])
    zz = np.array([z.decisions[i] for i in ids])
    return pf_reweight(ps, _log_binary_likelihood(ps.xy, ps.present, sensor_xy, zz, params))


def systematic_indices(weights, rng):
    """Indices chosen by systematic resampling with one uniform offset."""
    n = len(weights)
    positions = (check_rng(rng).random() + np.arange(n)) / n
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    return np.searchsorted(cumulative, positions, side="right")


def pf_resample(ps, rng):
    """Systematic resampling; output weights are all exactly ``1/N``."""
    _require_nonempty(ps)
    if abs(ps.weights.sum() - 1.0) > SUM_TOL:
        raise ContractError("weights must sum to 1 before resampling")
    idx = systematic_indices(ps.weights, rng)
    n = len(ps)
    return replace(
        ps,
        xy=ps.xy[idx].copy(),
        vel=ps.vel[idx].copy(),
        present=ps.present[idx].copy(),
        weights=np.full(n, 1.0 / n),
    )


def effective_sample_size(weights):
    return 1.0 / np.sum(np.square(weights))


def pf_estimate(ps):
    """Weighted mean position and weighted RMS radius around it."""
    _require_nonempty(ps)
    mean = ps.weights @ ps.xy
    spread = np.sqrt(ps.weights @ ((ps.xy - mean) ** 2).sum(axis=1))
    return Position(mean[0], mean[1]), float(spread)


# ---------------------------------------------------------------- Kalman filter


def _is_psd(M, tol=1e-9):
    return np.allclose(M, M.T, atol=1e-12) and np.linalg.eigvalsh(M).min() >= -tol


@dataclass(frozen=True)
class LinearGaussianModel:
    F: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    x0_mean: np.ndarray = None
    x0_cov: np.ndarray = None

    def __post_init__(self):
        F, H, Q, R = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (self.F, self.H, self.Q, self.R))
        n = F.shape[0]
        x0 = np.zeros(n) if self.x0_mean is None else np.asarray(self.x0_mean, dtype=float).ravel()
        P0 = np.eye(n) if self.x0_cov is None else np.atleast_2d(np.asarray(self.x0_cov, dtype=float))
        if F.shape != (n, n) or Q.shape != (n, n) or H.shape[1] != n or R.shape != (H.shape[0],) * 2:
            raise ContractError("inconsistent model dimensions")
        if x0.shape != (n,) or P0.shape != (n, n):
            raise ContractError("initial state dimensions do not match F")
        for name, M in (("Q", Q), ("R", R), ("x0_cov", P0)):
            if not _is_psd(M):
                raise InvalidConfigError(f"{name} must be symmetric positive semidefinite")
        for name, value in (("F", F), ("H", H), ("Q", Q), ("R", R), ("x0_mean", x0), ("x0_cov", P0)):
            object.__setattr__(self, name, value)

    def initial_belief(self):
        return GaussianBelief(self.x0_mean.copy(), self.x0_cov.copy())


@dataclass(frozen=True)
class GaussianBelief:
    mean: np.ndarray
    cov: np.ndarray


def kf_predict(b, m):
    """Time update: ``mean <- F mean``, ``cov <- F cov F^T + Q``."""
    if b.mean.shape != (m.F.shape[0],) or b.cov.shape != m.F.shape:
        raise ContractError("belief dimensions do not match the model")
    cov = m.F @ b.cov @ m.F.T + m.Q
    return GaussianBelief(m.F @ b.mean, 0.5 * (cov + cov.T))


def kalman_gain(b, m):
    S = m.H @ b.cov @ m.H.T + m.R
    if np.linalg.cond(S) > 1e14:
        raise NumericalError("innovation covariance is singular")
    return np.linalg.solve(S.T, (b.cov @ m.H.T).T).T


def kf_update(b, m, z):
    """Measurement update with gain ``K = P H^T (H P H^T + R)^-1``.

    The covariance is ``(I - K H) P``, symmetrized.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (m.H.shape[0],) or b.mean.shape != (m.H.shape[1],):
        raise ContractError("measurement dimension does not match H")
    K = kalman_gain(b, m)
    mean = b.mean + K @ (z - m.H @ b.mean)
    cov = (np.eye(len(b.mean)) - K @ m.H) @ b.cov
    return GaussianBelief(mean, 0.5 * (cov + cov.T))


# ------------------------------------------------------------------- trackers


def _check_observation_mode(mode):
    if mode not in ("binary", "position"):
        raise InvalidConfigError(f"observation must be 'binary' or 'position', got {mode!r}")


class ParticleFilterTracker(BaseEstimator):
    """Particle filter tracker with a known starting position.

    With ``observation="binary"``, ``fit`` takes sensor coordinates and
    ``predict`` a (T, S) matrix of detector decisions (NaN for inactive sensors).
    With ``observation="position"`` no fit data is needed and ``predict`` takes a
    (T, 2) matrix of noisy position fixes with standard deviation
    ``measurement_sigma``.
    """

    def __init__(
        self,
        n_particles=50,
        resample_threshold=0.5,
        observation="binary",
        sensor=None,
        target=None,
        measurement_sigma=1.0,
        init_spread=0.0,
        random_state=None,
    ):
        self.n_particles = n_particles
        self.resample_threshold = resample_threshold
        self.observation = observation
        self.sensor = sensor
        self.target = target
        self.measurement_sigma = measurement_sigma
        self.init_spread = init_spread
        self.random_state = random_state

    def fit(self, sensor_positions=None, y=None):
        _check_observation_mode(self.observation)
        if self.observation == "binary":
            self.sensor_xy_ = check_points(sensor_positions, "sensor_positions")[:, :2]
        else:
            self.sensor_xy_ = np.zeros((0, 2))
        self.sensor_ = self.sensor if self.sensor is not None else SensorParams()
        self.target_ = self.target if self.target is not None else TargetModelParams(p_out=0.0)
        return self

    def _log_likelihood(self, ps, z_row):
        if self.observation == "position":
            r2 = ((ps.xy - z_row[None, :2]) ** 2).sum(axis=1)
            return -0.5 * r2 / self.measurement_sigma**2
        active = np.isfinite(z_row)
        return _log_binary_likelihood(
            ps.xy, ps.present, self.sensor_xy_[active], z_row[active].astype(int), self.sensor_
        )

    def predict(self, Z, start):
        """Track estimates, one row per time step, shape (T, 3)."""
        check_is_fitted(self, "sensor_xy_")
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        rng = check_rng(self.random_state)
        start = start if isinstance(start, Position) else Position.from_array(start)
        ps = ParticleSet.at(start, self.n_particles, rng, self.init_spread)
        out = np.zeros((len(Z), 3))
        self.spread_ = np.zeros(len(Z))
        for t, z_row in enumerate(Z):
            if t > 0:
                ps = pf_predict(ps, self.target_, rng)
            try:
                ps = pf_reweight(ps, self._log_likelihood(ps, z_row))
            except DegenerateUpdateError:
                ps = replace(ps, weights=np.full(len(ps), 1.0 / len(ps)))
            est, spread = pf_estimate(ps)
            out[t] = est.as_array()
            self.spread_[t] = spread
            if effective_sample_size(ps.weights) < self.resample_threshold * len(ps):
                ps = pf_resample(ps, rng)
        self.particles_ = ps
        return out


def firing_centroid(z_row, sensor_xy):
    """Mean position of the sensors that fired, or None when none did."""
    fired = np.isfinite(z_row) & (np.nan_to_num(z_row) == 1)
    if not fired.any():
        return None
    return sensor_xy[fired].mean(axis=0)


class KalmanTracker(BaseEstimator):
    """Random-walk Kalman filter on planar position.

    Binary decisions are not Gaussian, so with ``observation="binary"`` each
    step's measurement is the centroid of the sensors that fired, treated as a
    noisy position fix with variance ``r`` per axis; steps where nothing fired
    are prediction only. The start is known, so the prior variance
    ``init_var`` defaults to zero, matching the particle filter's point-mass start.
    """

    def __init__(self, q=0.09, r=1.0, observation="binary", init_var=0.0):
        self.q = q
        self.r = r
        self.observation = observation
        self.init_var = init_var

    def fit(self, sensor_positions=None, y=None):
        _check_observation_mode(self.observation)
        if self.observation == "binary":
            self.sensor_xy_ = check_points(sensor_positions, "sensor_positions")[:, :2]
        else:
            self.sensor_xy_ = np.zeros((0, 2))
        return self

    def model(self, start):
        check_nonnegative(self.init_var, "init_var")
        return LinearGaussianModel(
            F=np.eye(2),
            H=np.eye(2),
            Q=self.q * np.eye(2),
            R=self.r * np.eye(2),
            x0_mean=np.array([start.x, start.y]),
            x0_cov=self.init_var * np.eye(2),
        )

    def predict(self, Z, start):
        check_is_fitted(self, "sensor_xy_")
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        start = start if isinstance(start, Position) else Position.from_array(start)
        m = self.model(start)
        b = m.initial_belief()
        out = np.zeros((len(Z), 3))
        for t, z_row in enumerate(Z):
            if t > 0:
                b = kf_predict(b, m)
            meas = z_row[:2] if self.observation == "position" else firing_centroid(z_row, self.sensor_xy_)
            if meas is not None:
                b = kf_update(b, m, meas)
            out[t, :2] = b.mean
        self.belief_ = b
        return out
