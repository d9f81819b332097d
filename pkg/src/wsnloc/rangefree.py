"""Range-free indoor localization: DV-Hop and ROCRSSI ring overlapping."""

import math
from collections import deque
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points, check_positive
from .exceptions import (
    CalibrationError,
    ContractError,
    InvalidConfigError,
    NoEstimateError,
    RankDeficiencyError,
    UnderdeterminedError,
)
from .world import Position, distance


# --------------------------------------------------------------------------- DV-Hop


@dataclass
class HopTable:
    """Minimum hop counts keyed by ``(node_id, anchor_id)``.

    An anchor's entry for itself is 0. Unreachable pairs have no entry.
    """

    hops: dict = field(default_factory=dict)

    def get(self, node_id, anchor_id):
        return self.hops.get((node_id, anchor_id))

    def reachable_anchors(self, node_id):
        return sorted(a for (n, a) in self.hops if n == node_id)


@dataclass(frozen=True)
class AnchorCalibration:
    anchor_id: int
    hop_size: float

    def __post_init__(self):
        if not self.hop_size > 0:
            raise CalibrationError(f"hop size must be positive, got {self.hop_size}")


def flood_hops(world):
    """Breadth-first flood from every anchor over the connectivity graph."""
    adjacency = world.adjacency
    hops = {}
    for anchor in world.anchors:
        seen = {anchor.id: 0}
        queue = deque([anchor.id])
        while queue:
            u = queue.popleft()
            for v in adjacency[u]:
                if v not in seen:
                    seen[v] = seen[u] + 1
                    queue.append(v)
        for node_id, h in seen.items():
            hops[(node_id, anchor.id)] = h
    return HopTable(hops)


def _anchor_positions(anchors):
    if isinstance(anchors, dict):
        return {k: v for k, v in anchors.items()}
    return {a.id: a.pos for a in anchors}


def avg_hop_size(anchor_id, table, anchors):
    """Sum of distances to peer anchors over the sum of hops to them."""
    pos = _anchor_positions(anchors)
    total_d = 0.0
    total_h = 0
    for peer, peer_pos in pos.items():
        if peer == anchor_id:
            continue
        h = table.get(peer, anchor_id)
        if h is None:
            continue
        total_d += distance(pos[anchor_id], peer_pos)
        total_h += h
    if total_h == 0:
        raise CalibrationError(f"anchor {anchor_id} reaches no peer anchor")
    return AnchorCalibration(anchor_id, total_d / total_h)


def multilaterate(centers, dists):
    """Planar position from circle equations, linearized against the first circle.

    Subtracting circle 0 from circle i gives ``2 (c_i - c_0) . p = |c_i|^2 -
    |c_0|^2 - d_i^2 + d_0^2``; the stacked system is solved in the least-squares
    sense.
    """
    c = np.asarray(centers, dtype=float)[:, :2]
    d = np.asarray(dists, dtype=float)
    if len(c) < 3:
        raise UnderdeterminedError(f"need at least 3 references, got {len(c)}")
    A = 2.0 * (c[1:] - c[0])
    b = (c[1:] ** 2).sum(axis=1) - (c[0] ** 2).sum() - d[1:] ** 2 + d[0] ** 2
    scale = max(1.0, np.abs(A).max())
    if np.linalg.matrix_rank(A / scale, tol=1e-9) < 2:
        raise RankDeficiencyError("reference positions are collinear")
    p, *_ = np.linalg.lstsq(A, b, rcond=None)
    return p


def _dvhop_core(anchor_pos, hop_sizes, hops_row):
    """Shared DV-Hop solve on arrays.

    ``hops_row[j]`` is the hop count to anchor ``j`` (NaN when unreachable) and
    ``hop_sizes[j]`` that anchor's calibration (NaN when uncalibrated).
    """
    hops_row = np.asarray(hops_row, dtype=float)
    reach = np.flatnonzero(np.isfinite(hops_row))
    if reach.size and np.any(hops_row[reach] == 0):
        return anchor_pos[reach[hops_row[reach] == 0][0]].copy()
    if reach.size < 3:
        raise UnderdeterminedError(f"node reaches {reach.size} anchors, need 3")
    calibrated = reach[np.isfinite(hop_sizes[reach])]
    if calibrated.size == 0:
        raise CalibrationError("no reachable anchor carries a hop-size calibration")
    # np.argmin picks the first minimum, i.e. the lowest anchor index on ties
    nearest = calibrated[np.argmin(hops_row[calibrated])]
    dists = hop_sizes[nearest] * hops_row[reach]
    xy = multilaterate(anchor_pos[reach], dists)
    return np.array([xy[0], xy[1], 0.0])


def dvhop_estimate(node_id, table, calibrations, anchors):
    """DV-Hop position of ``node_id`` from its hop counts to every reachable anchor."""
    pos = _anchor_positions(anchors)
    ids = sorted(pos)
    if isinstance(calibrations, dict):
        calibrations = calibrations.values()
    cal = {c.anchor_id: c.hop_size for c in calibrations}
    anchor_pos = np.array([pos[i].as_array() for i in ids]).reshape(-1, 3)
    hop_sizes = np.array([cal.get(i, np.nan) for i in ids], dtype=float)
    row = np.array([np.nan if table.get(node_id, i) is None else table.get(node_id, i) for i in ids])
    return Position.from_array(_dvhop_core(anchor_pos, hop_sizes, row))


def calibrate_anchors(table, anchors):
    """Hop-size calibration for every anchor that reaches at least one peer."""
    out = {}
    for a in _anchor_positions(anchors):
        try:
            out[a] = avg_hop_size(a, table, anchors)
        except CalibrationError:
            pass
    return out


class DVHopLocalizer(BaseEstimator):
    """DV-Hop as an estimator over hop-count matrices.

    ``fit`` takes anchor coordinates and the anchor-to-anchor hop matrix (NaN
    for unreachable pairs); ``predict`` takes one row of hop counts to the
    anchors per unknown node and returns an ``(n, 3)`` array of estimates, NaN
    where a node cannot be localized.
    """

    def fit(self, anchor_positions, anchor_hops):
        pos = check_points(anchor_positions, "anchor_positions")
        hops = np.asarray(anchor_hops, dtype=float)
        if hops.shape != (len(pos), len(pos)):
            raise ContractError("anchor_hops must be square with one row per anchor")
        d = np.sqrt(((pos[:, None] - pos[None]) ** 2).sum(-1))
        off = ~np.eye(len(pos), dtype=bool) & np.isfinite(hops)
        sizes = np.full(len(pos), np.nan)
        for j in range(len(pos)):
            h = hops[j][off[j]].sum()
            if h > 0:
                sizes[j] = d[j][off[j]].sum() / h
        self.anchor_positions_ = pos
        self.hop_sizes_ = sizes
        return self

    def predict(self, hops):
        check_is_fitted(self, "hop_sizes_")
        hops = np.atleast_2d(np.asarray(hops, dtype=float))
        if hops.shape[1] != len(self.anchor_positions_):
            raise ContractError("hop rows must have one column per anchor")
        out = np.full((len(hops), 3), np.nan)
        for i, row in enumerate(hops):
            try:
                out[i] = _dvhop_core(self.anchor_positions_, self.hop_sizes_, row)
            except (UnderdeterminedError, RankDeficiencyError, CalibrationError):
                pass
        return out


def dvhop_localize(world):
    """Run DV-Hop for every unknown node of ``world``.

    Returns ``(estimates, failures)``: a dict node id -> Position and a dict node
    id -> error message.
    """
    table = flood_hops(world)
    anchors = world.anchors
    calibrations = calibrate_anchors(table, anchors)
    estimates, failures = {}, {}
    for node in world.unknowns:
        try:
            estimates[node.id] = dvhop_estimate(node.id, table, calibrations, anchors)
        except (UnderdeterminedError, RankDeficiencyError, CalibrationError) as exc:
            failures[node.id] = f"{type(exc).__name__}: {exc}"
    return estimates, failures


# --------------------------------------------------------------------------- ROCRSSI


@dataclass(frozen=True)
class Ring:
    center: Position
    inner_r: float
    outer_r: float

    def __post_init__(self):
        if not 0 <= self.inner_r < self.outer_r:
            raise ContractError(f"ring radii must satisfy 0 <= inner < outer, got {self.inner_r}, {self.outer_r}")


@dataclass
class GridAccumulator:
    """Coverage counters over square cells of a ``width`` x ``height`` field."""

    bounds: tuple
    cell_size: float
    counts: np.ndarray = None

    def __post_init__(self):
        check_positive(self.cell_size, "cell_size")
        w, h = self.bounds
        self.nx = math.ceil(w / self.cell_size)
        self.ny = math.ceil(h / self.cell_size)
        if self.counts is None:
            self.counts = np.zeros((self.ny, self.nx), dtype=int)

    def centers(self):
        """Cell-center coordinates as two (ny, nx) arrays."""
        xs = (np.arange(self.nx) + 0.5) * self.cell_size
        ys = (np.arange(self.ny) + 0.5) * self.cell_size
        return np.meshgrid(xs, ys)

    def accumulate(self, rings):
        """Reset the counters and add one per ring covering each cell center."""
        gx, gy = self.centers()
        self.counts = np.zeros((self.ny, self.nx), dtype=int)
        for ring in rings:
            r = np.hypot(gx - ring.center.x, gy - ring.center.y)
            self.counts += (r >= ring.inner_r) & (r <= ring.outer_r)
        return self.counts


def _rssi_lookup(rssi, a, b):
    if (a, b) in rssi:
        r = rssi[(a, b)]
    else:
        r = rssi[(b, a)]
    return r.value if hasattr(r, "value") else float(r)


def rocrssi_rings(target_id, anchors, rssi):
    """Rings bracketing the target between pairs of peer anchors.

    For anchor A and peers B, C with ``RSSI_AB > RSSI_AS > RSSI_AC`` the target S
    lies farther from A than B and closer than C, giving the annulus
    ``[d(A,B), d(A,C)]`` around A. ``rssi`` maps node-id pairs (either order) to
    dBm values or :class:`RssiReading` objects.
    """
    pos = _anchor_positions(anchors)
    rings = []
    ids = sorted(pos)
    for a in ids:
        r_as = _rssi_lookup(rssi, a, target_id)
        for b, c in permutations([i for i in ids if i != a], 2):
            if _rssi_lookup(rssi, a, b) > r_as > _rssi_lookup(rssi, a, c):
                inner, outer = distance(pos[a], pos[b]), distance(pos[a], pos[c])
                if inner < outer:
                    rings.append(Ring(pos[a], inner, outer))
    return rings


def _rings_from_arrays(anchor_pos, anchor_rssi, target_rssi, radii):
    rings = []
    n = len(anchor_pos)
    for a in range(n):
        center = Position.from_array(anchor_pos[a])
        for b, c in permutations([i for i in range(n) if i != a], 2):
            if anchor_rssi[a, b] > target_rssi[a] > anchor_rssi[a, c]:
                inner, outer = radii[a, b], radii[a, c]
                if inner < outer:
                    rings.append(Ring(center, inner, outer))
    return rings


def rocrssi_locate(rings, grid):
    """Centroid of the grid cells covered by the most rings."""
    if not rings:
        raise NoEstimateError("no rings to overlap")
    return _centroid_of_max(grid.accumulate(rings), grid)


def ring_coverage(anchor_pos, anchor_rssi, target_rssi, radii, grid):
    """Per-cell ring counts without materializing the rings.

    Around anchor A a cell at radius r is covered by ring (B, C) iff
    ``d_AB <= r <= d_AC``, so its count is the number of qualifying B with
    ``d_AB <= r`` times the number of qualifying C with ``d_AC >= r``. Equals
    ``grid.accumulate(rings)`` except on the measure-zero set where a cell
    center sits exactly on a degenerate ring with ``d_AB == d_AC``.
    """
    gx, gy = grid.centers()
    counts = np.zeros(gx.shape, dtype=int)
    n = len(anchor_pos)
    for a in range(n):
        peers = np.arange(n) != a
        closer = np.sort(radii[a][peers & (anchor_rssi[a] > target_rssi[a])])
        farther = np.sort(radii[a][peers & (anchor_rssi[a] < target_rssi[a])])
        if closer.size == 0 or farther.size == 0:
            continue
        r = np.hypot(gx - anchor_pos[a, 0], gy - anchor_pos[a, 1])
        n_inner = np.searchsorted(closer, r, side="right")
        n_outer = farther.size - np.searchsorted(farther, r, side="left")
        counts += n_inner * n_outer
    grid.counts = counts
    return counts


def _centroid_of_max(counts, grid):
    top = counts.max()
    if top == 0:
        raise NoEstimateError("no grid cell is covered by any ring")
    gx, gy = grid.centers()
    mask = counts == top
    return Position(float(gx[mask].mean()), float(gy[mask].mean()))


def _invert_path_loss(rssi, radio):
    return 10.0 ** ((radio.ref_power - rssi) / (10.0 * radio.exponent))


class ROCRSSILocalizer(BaseEstimator):
    """ROCRSSI ring overlapping as an estimator over RSSI matrices.

    ``fit`` takes anchor coordinates and the anchor-to-anchor RSSI matrix;
    ``predict`` takes one row of anchor-to-target RSSI per target. Ring radii are
    true inter-anchor distances by default; ``radii="measured"`` inverts the
    path-loss model in ``radio`` instead.
    """

    def __init__(self, bounds=(10.0, 10.0), cell_size=0.2, radii="true", radio=None):
        self.bounds = bounds
        self.cell_size = cell_size
        self.radii = radii
        self.radio = radio

    def fit(self, anchor_positions, anchor_rssi):
        pos = check_points(anchor_positions, "anchor_positions")
        rssi = np.asarray(anchor_rssi, dtype=float)
        if rssi.shape != (len(pos), len(pos)):
            raise ContractError("anchor_rssi must be square with one row per anchor")
        if self.radii == "true":
            radii = np.sqrt(((pos[:, None] - pos[None]) ** 2).sum(-1))
        elif self.radii == "measured":
            if self.radio is None:
                raise InvalidConfigError("radii='measured' needs a PathLossParams radio")
            radii = _invert_path_loss(rssi, self.radio)
        else:
            raise InvalidConfigError(f"radii must be 'true' or 'measured', got {self.radii!r}")
        self.anchor_positions_ = pos
        self.anchor_rssi_ = rssi
        self.radii_ = radii
        return self

    def predict(self, target_rssi):
        check_is_fitted(self, "radii_")
        X = np.atleast_2d(np.asarray(target_rssi, dtype=float))
        out = np.full((len(X), 3), np.nan)
        for i, row in enumerate(X):
            grid = GridAccumulator(tuple(self.bounds), self.cell_size)
            counts = ring_coverage(self.anchor_positions_, self.anchor_rssi_, row, self.radii_, grid)
            try:
                out[i] = _centroid_of_max(counts, grid).as_array()
            except NoEstimateError:
                pass
        return out


def rocrssi_localize(world, radio, rng, cell_size=None, radii="true"):
    """Run ROCRSSI for every unknown node with freshly simulated RSSI.

    Returns ``(estimates, failures)`` like :func:`dvhop_localize`.
    """
    from .propagation import rssi_matrix

    anchors = world.anchors
    unknowns = world.unknowns
    if cell_size is None:
        cell_size = world.comm_range / 10.0
    a_pos = np.array([a.pos.as_array() for a in anchors]).reshape(-1, 3)
    u_pos = np.array([u.pos.as_array() for u in unknowns]).reshape(-1, 3)
    aa = rssi_matrix(a_pos, a_pos, radio, rng)
    aa = np.triu(aa, 1) + np.triu(aa, 1).T
    au = rssi_matrix(a_pos, u_pos, radio, rng)
    model = ROCRSSILocalizer((world.width, world.height), cell_size, radii, radio).fit(a_pos, aa)
    est = model.predict(au.T) if len(unknowns) else np.zeros((0, 3))
    estimates, failures = {}, {}
    for node, row in zip(unknowns, est):
        if np.all(np.isfinite(row)):
            estimates[node.id] = Position.from_array(row)
        else:
            failures[node.id] = "NoEstimateError: no bracketing ring"
    return estimates, failures
