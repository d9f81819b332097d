"""Outdoor coarse localization: Cell-ID centroids, sphere trilateration, beacon accounting."""

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points
from .exceptions import ContractError, DomainError, NoEstimateError, RankDeficiencyError, UnderdeterminedError
from .world import Position, distance


@dataclass(frozen=True)
class BeaconMessage:
    sender: int
    pos: Position
    step: int


@dataclass(frozen=True)
class SphereObservation:
    center: Position
    radius: float

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius >= 0):
            raise ContractError(f"radius must be finite and >= 0, got {self.radius}")


def cellid_locate(heard):
    """Unweighted centroid of the heard anchor (tower) positions."""
    heard = list(heard)
    if not heard:
        raise NoEstimateError("no anchor heard")
    return Position.from_array(np.mean([p.as_array() for p in heard], axis=0))


def sphere_locate(obs):
    """Least-squares point on ``|p - c_i| = r_i`` for at least four spheres.

    The first sphere equation is subtracted from the rest, leaving the linear
    system ``2 (c_i - c_0) . p = |c_i|^2 - |c_0|^2 - r_i^2 + r_0^2``.
    """
    obs = list(obs)
    if len(obs) < 4:
        raise UnderdeterminedError(f"need at least 4 spheres, got {len(obs)}")
    c = np.array([o.center.as_array() for o in obs])
    r = np.array([o.radius for o in obs])
    A = 2.0 * (c[1:] - c[0])
    b = (c[1:] ** 2).sum(axis=1) - (c[0] ** 2).sum() - r[1:] ** 2 + r[0] ** 2
    scale = max(1.0, np.abs(A).max())
    if np.linalg.matrix_rank(A / scale, tol=1e-9) < 3:
        raise RankDeficiencyError("sphere centers are coplanar")
    p, *_ = np.linalg.lstsq(A, b, rcond=None)
    return Position.from_array(p)


def beacon_overhead(total_beacons, total_mobile_nodes):
    """Transmitted beacon messages per mobile node."""
    if total_mobile_nodes < 1:
        raise DomainError("beacon overhead needs at least one mobile node")
    return total_beacons / total_mobile_nodes


@dataclass
class BeaconLog:
    """Transmission and reception record of a beacon broadcast run.

    With ``first_last_only`` a static node keeps only the first and the latest
    beacon per mobile sender; later receptions replace the stored "last" one.
    """

    first_last_only: bool = True
    transmitted: list = field(default_factory=list)
    received: dict = field(default_factory=dict)
    discarded: int = 0

    def transmit(self, msg):
        self.transmitted.append(msg)

    def receive(self, static_id, msg):
        per_sender = self.received.setdefault(static_id, {}).setdefault(msg.sender, [])
        if self.first_last_only and len(per_sender) == 2:
            per_sender[1] = msg
            self.discarded += 1
        else:
            per_sender.append(msg)

    def overhead(self, n_mobile):
        return beacon_overhead(len(self.transmitted), n_mobile)

    def kept(self, static_id):
        return [m for msgs in self.received.get(static_id, {}).values() for m in msgs]


def simulate_beacons(mobile_tracks, static_positions, comm_range, first_last_only=True):
    """Broadcast one beacon per mobile node per step and log static receptions.

    ``mobile_tracks`` maps sender id to a list of 3D Positions, one per step.
    """
    log = BeaconLog(first_last_only)
    for sender in sorted(mobile_tracks):
        for step, pos in enumerate(mobile_tracks[sender]):
            msg = BeaconMessage(sender, pos, step)
            log.transmit(msg)
            for sid, spos in enumerate(static_positions):
                if distance(pos, spos) <= comm_range:
                    log.receive(sid, msg)
    return log


class CellIdLocator(BaseEstimator):
    """``fit(tower_positions)``, ``predict(heard)`` with ``heard`` a boolean (n, towers) mask."""

    def fit(self, tower_positions, y=None):
        self.towers_ = check_points(tower_positions, "tower_positions")
        return self

    def predict(self, heard):
        check_is_fitted(self, "towers_")
        heard = np.atleast_2d(np.asarray(heard, dtype=bool))
        if heard.shape[1] != len(self.towers_):
            raise ContractError("heard mask must have one column per tower")
        out = np.full((len(heard), 3), np.nan)
        for i, row in enumerate(heard):
            if row.any():
                out[i] = self.towers_[row].mean(axis=0)
        return out


class SphereLocator(BaseEstimator):
    """``fit(centers)``, ``predict(radii)`` with one row of ranges per unknown point."""

    def fit(self, centers, y=None):
        self.centers_ = check_points(centers, "centers")
        if len(self.centers_) < 4:
            raise UnderdeterminedError("need at least 4 sphere centers")
        return self

    def predict(self, radii):
        check_is_fitted(self, "centers_")
        radii = np.atleast_2d(np.asarray(radii, dtype=float))
        return np.array(
            [
                sphere_locate(SphereObservation(Position.from_array(c), r) for c, r in zip(self.centers_, row)).as_array()
                for row in radii
            ]
        )
