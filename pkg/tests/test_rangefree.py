import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from wsnloc.exceptions import CalibrationError, NoEstimateError, RankDeficiencyError, UnderdeterminedError
from wsnloc.propagation import PathLossParams, rssi_at, rssi_matrix
from wsnloc.rangefree import (
    DVHopLocalizer,
    GridAccumulator,
    HopTable,
    Ring,
    ROCRSSILocalizer,
    _rings_from_arrays,
    avg_hop_size,
    dvhop_estimate,
    dvhop_localize,
    flood_hops,
    multilaterate,
    ring_coverage,
    rocrssi_locate,
    rocrssi_rings,
)
from wsnloc.world import Node, NodeKind, Position, World, build_world, distance


def _world(points, kinds, comm_range=2.0, size=10.0):
    nodes = [Node(i, k, Position(*p)) for i, (p, k) in enumerate(zip(points, kinds))]
    return World(size, size, comm_range, tuple(nodes))


A, U = NodeKind.ANCHOR, NodeKind.UNKNOWN


def test_flood_chain():
    w = _world([(0, 1), (1.5, 1), (3, 1), (9, 9)], [A, U, U, U])
    t = flood_hops(w)
    assert t.get(1, 0) == 1
    assert t.get(2, 0) == 2
    assert t.get(3, 0) is None
    assert t.get(0, 0) == 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_flood_matches_dijkstra(seed):
    w = build_world(10, 10, 2.5, 4, 26, seed=seed)
    ids = [n.id for n in w.nodes]
    adj = np.zeros((len(ids), len(ids)))
    for i in ids:
        for j in w.adjacency[i]:
            adj[i, j] = 1
    dist = shortest_path(csr_matrix(adj), unweighted=True)
    table = flood_hops(w)
    for a in w.anchors:
        for n in ids:
            expected = dist[a.id, n]
            got = table.get(n, a.id)
            if math.isinf(expected):
                assert got is None
            else:
                assert got == expected


def _anchors(*pts):
    return {i: Position(*p) for i, p in enumerate(pts)}


def test_avg_hop_size_examples():
    two = _anchors((0, 0), (6, 0))
    t = HopTable({(1, 0): 3, (0, 1): 3, (0, 0): 0, (1, 1): 0})
    assert avg_hop_size(0, t, two).hop_size == 2.0

    three = _anchors((0, 0), (4, 0), (0, 6))
    t = HopTable({(1, 0): 2, (2, 0): 3})
    assert avg_hop_size(0, t, three).hop_size == pytest.approx((4 + 6) / (2 + 3))

    with pytest.raises(CalibrationError):
        avg_hop_size(0, HopTable({(0, 0): 0}), _anchors((0, 0)))


def _axes_world():
    pts = [(0, 0), (8, 0), (0, 8)]
    pts += [(1.6 * k, 0) for k in range(1, 5)] + [(0, 1.6 * k) for k in range(1, 5)]
    pts += [(1, 1)]
    kinds = [A, A, A] + [U] * 9
    return _world(pts, kinds)


def test_dvhop_axes_example():
    w = _axes_world()
    table = flood_hops(w)
    target = w.nodes[-1].id
    assert [table.get(target, a) for a in (0, 1, 2)] == [1, 5, 5]
    cal = {a.id: avg_hop_size(a.id, table, w.anchors) for a in w.anchors}
    assert cal[0].hop_size == pytest.approx(1.6)
    est = dvhop_estimate(target, table, cal, w.anchors)
    # subtracting the circle at (0,0) r=1.6 from the circles at (8,0) and (0,8), r=8:
    # 16 x = 1.6^2 and 16 y = 1.6^2
    assert (est.x, est.y) == pytest.approx((0.16, 0.16))
    assert distance(est, Position(1, 1)) <= cal[0].hop_size


def test_dvhop_node_on_anchor():
    w = _axes_world()
    table = flood_hops(w)
    cal = {a.id: avg_hop_size(a.id, table, w.anchors) for a in w.anchors}
    assert dvhop_estimate(1, table, cal, w.anchors) == Position(8, 0)


def test_dvhop_two_anchors_underdetermined():
    w = _world([(0, 1), (3, 1), (1.5, 1)], [A, A, U])
    table = flood_hops(w)
    cal = {a.id: avg_hop_size(a.id, table, w.anchors) for a in w.anchors}
    with pytest.raises(UnderdeterminedError):
        dvhop_estimate(2, table, cal, w.anchors)


def test_multilaterate_collinear():
    with pytest.raises(RankDeficiencyError):
        multilaterate([(0, 0), (1, 0), (2, 0)], [1, 1, 1])


@pytest.mark.parametrize("seed", range(5))
def test_multilaterate_is_least_squares_minimum(seed):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0, 10, (5, 2))
    truth = rng.uniform(2, 8, 2)
    dists = np.linalg.norm(centers - truth, axis=1) + rng.normal(0, 0.3, 5)
    est = multilaterate(centers, dists)

    pitch = 0.01
    gx, gy = np.meshgrid(np.arange(-2, 12, pitch), np.arange(-2, 12, pitch))
    res = np.zeros_like(gx)
    for (cx, cy), d in zip(centers[1:], dists[1:]):
        # (circle i) - (circle 0), both sides as scalar fields over the grid
        lhs = (gx - cx) ** 2 + (gy - cy) ** 2 - d**2
        lhs -= (gx - centers[0, 0]) ** 2 + (gy - centers[0, 1]) ** 2 - dists[0] ** 2
        res += lhs**2
    i = np.unravel_index(np.argmin(res), res.shape)
    assert abs(gx[i] - est[0]) <= pitch and abs(gy[i] - est[1]) <= pitch


def test_dvhop_estimator_matches_functional():
    w = build_world(10, 10, 2, 8, 40, seed=11)
    table = flood_hops(w)
    anchors = w.anchors
    est, fail = dvhop_localize(w)
    a_pos = np.array([a.pos.as_array() for a in anchors])
    hop = lambda n, a: np.nan if table.get(n, a) is None else table.get(n, a)
    aa = np.array([[hop(a.id, b.id) for b in anchors] for a in anchors])
    X = np.array([[hop(u.id, a.id) for a in anchors] for u in w.unknowns])
    pred = DVHopLocalizer().fit(a_pos, aa).predict(X)
    for u, row in zip(w.unknowns, pred):
        if u.id in est:
            assert row == pytest.approx(est[u.id].as_array())
        else:
            assert np.isnan(row).all()


# ---------------------------------------------------------------- ROCRSSI


def _line_setup():
    anchors = {0: Position(0, 0), 1: Position(1, 0), 2: Position(3, 0)}
    radio = PathLossParams(-40, 2, 0)
    pts = dict(anchors)
    pts[9] = Position(2, 0)
    rssi = {(i, j): rssi_at(distance(pts[i], pts[j]), radio) for i in pts for j in pts if i < j}
    return anchors, rssi


def test_rings_line_example():
    anchors, rssi = _line_setup()
    rings = rocrssi_rings(9, anchors, rssi)
    assert Ring(Position(0, 0), 1, 3) in rings
    assert all(r.center == Position(0, 0) for r in rings if r.inner_r == 1 and r.outer_r == 3)


def test_no_ring_when_target_closest():
    anchors, _ = _line_setup()
    radio = PathLossParams(-40, 2, 0)
    pts = dict(anchors)
    pts[9] = Position(0.2, 0)
    rssi = {(i, j): rssi_at(distance(pts[i], pts[j]), radio) for i in pts for j in pts if i < j}
    assert not [r for r in rocrssi_rings(9, anchors, rssi) if r.center == Position(0, 0)]


def test_no_ring_on_ties():
    anchors = {0: Position(0, 0), 1: Position(1, 0), 2: Position(3, 0)}
    rssi = {(0, 1): -50.0, (0, 2): -70.0, (1, 2): -60.0, (0, 9): -50.0, (1, 9): -55.0, (2, 9): -55.0}
    assert not [r for r in rocrssi_rings(9, anchors, rssi) if r.center == Position(0, 0)]


def test_locate_requires_rings():
    with pytest.raises(NoEstimateError):
        rocrssi_locate([], GridAccumulator((10, 10), 0.5))


def _brute_force_centroid(rings, bounds, cell):
    nx, ny = math.ceil(bounds[0] / cell), math.ceil(bounds[1] / cell)
    best, cells = 0, []
    for iy in range(ny):
        for ix in range(nx):
            cx, cy = (ix + 0.5) * cell, (iy + 0.5) * cell
            c = sum(1 for r in rings if r.inner_r <= math.hypot(cx - r.center.x, cy - r.center.y) <= r.outer_r)
            if c > best:
                best, cells = c, [(cx, cy)]
            elif c == best and c > 0:
                cells.append((cx, cy))
    return np.mean(cells, axis=0)


def test_single_annulus_centroid():
    ring = Ring(Position(5, 5), 1.0, 2.5)
    est = rocrssi_locate([ring], GridAccumulator((10, 10), 0.2))
    fine = _brute_force_centroid([ring], (10, 10), 0.05)
    assert math.hypot(est.x - fine[0], est.y - fine[1]) <= 0.2 * math.sqrt(2)
    assert (est.x, est.y) == pytest.approx((5, 5), abs=1e-9)


def test_duplicate_rings_invariant():
    rings = [Ring(Position(2, 3), 1.0, 4.0), Ring(Position(7, 6), 2.0, 5.0)]
    g = GridAccumulator((10, 10), 0.25)
    assert rocrssi_locate(rings, g) == rocrssi_locate(rings * 2, g)
    concentric = [Ring(Position(5, 5), 1, 2), Ring(Position(5, 5), 1, 2)]
    assert rocrssi_locate(concentric, g) == rocrssi_locate(concentric[:1], g)


def test_single_cell_intersection():
    rings = [Ring(Position(0.5, 0.5), 2.9, 3.1), Ring(Position(3.5, 3.5), 2.9, 3.1), Ring(Position(0.5, 6.5), 2.9, 3.1)]
    assert rocrssi_locate(rings, GridAccumulator((10, 10), 1.0)) == Position(0.5, 3.5)


@pytest.mark.parametrize("seed", range(5))
def test_coverage_fast_path_matches_rings(seed):
    rng = np.random.default_rng(seed)
    a = np.column_stack([rng.uniform(0, 10, (12, 2)), np.zeros(12)])
    radio = PathLossParams(-40, 2, 3)
    aa = rssi_matrix(a, a, radio, rng)
    aa = np.triu(aa, 1) + np.triu(aa, 1).T
    target = rssi_matrix(a, rng.uniform(0, 10, (1, 3)) * [1, 1, 0], radio, rng)[:, 0]
    radii = np.linalg.norm(a[:, None] - a[None], axis=-1)
    g1, g2 = GridAccumulator((10, 10), 0.2), GridAccumulator((10, 10), 0.2)
    expected = g1.accumulate(_rings_from_arrays(a, aa, target, radii))
    assert np.array_equal(ring_coverage(a, aa, target, radii, g2), expected)


def test_rocrssi_estimator_measured_radii():
    rng = np.random.default_rng(4)
    a = np.column_stack([rng.uniform(0, 10, (10, 2)), np.zeros(10)])
    radio = PathLossParams(-40, 2, 0)
    aa = rssi_matrix(a, a, radio)
    truth = np.array([[4.0, 6.0, 0.0]])
    X = rssi_matrix(a, truth, radio).T
    true_est = ROCRSSILocalizer((10, 10), 0.1).fit(a, aa).predict(X)
    measured = ROCRSSILocalizer((10, 10), 0.1, radii="measured", radio=radio).fit(a, aa).predict(X)
    # noiseless path loss inverts exactly, so both radius sources agree
    assert measured == pytest.approx(true_est, abs=1e-9)
    assert np.linalg.norm(true_est[0, :2] - truth[0, :2]) < 2.0
