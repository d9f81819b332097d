import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wsnloc.exceptions import ContractError, DomainError, NoEstimateError, RankDeficiencyError, UnderdeterminedError
from wsnloc.geo import (
    BeaconLog,
    BeaconMessage,
    CellIdLocator,
    SphereLocator,
    SphereObservation,
    beacon_overhead,
    cellid_locate,
    simulate_beacons,
    sphere_locate,
)
from wsnloc.world import Position, distance

coord = st.floats(-1e3, 1e3, allow_nan=False)


def test_cellid_examples():
    assert cellid_locate([Position(0, 0), Position(2, 0), Position(1, 3)]) == Position(1, 1)
    dup = cellid_locate([Position(0, 0), Position(2, 0), Position(2, 0)])
    assert dup.x == pytest.approx(4 / 3)
    with pytest.raises(NoEstimateError):
        cellid_locate([])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(coord, coord), min_size=1, max_size=6), coord, coord)
def test_cellid_translation_equivariant(pts, vx, vy):
    base = cellid_locate([Position(x, y) for x, y in pts])
    moved = cellid_locate([Position(x + vx, y + vy) for x, y in pts])
    assert moved.x == pytest.approx(base.x + vx, abs=1e-6)
    assert moved.y == pytest.approx(base.y + vy, abs=1e-6)


def _obs(centers, radii):
    return [SphereObservation(Position(*c), r) for c, r in zip(centers, radii)]


def test_sphere_origin():
    centers = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]
    assert sphere_locate(_obs(centers, [0, 1, 1, 1])) == Position(0, 0, 0)


@pytest.mark.parametrize("seed", range(10))
def test_sphere_forward_recovery(seed):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-50, 50, (6, 3))
    truth = rng.uniform(-50, 50, 3)
    radii = np.linalg.norm(centers - truth, axis=1)
    est = sphere_locate(_obs(centers, radii)).as_array()
    assert np.linalg.norm(est - truth) < 1e-6


def test_sphere_errors():
    with pytest.raises(UnderdeterminedError):
        sphere_locate(_obs([(0, 0, 0), (1, 0, 0), (0, 1, 0)], [1, 1, 1]))
    with pytest.raises(RankDeficiencyError):
        sphere_locate(_obs([(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0)], [1, 1, 1, 1]))
    with pytest.raises(ContractError):
        SphereObservation(Position(0, 0, 0), -1.0)


def test_sphere_least_squares_minimum():
    rng = np.random.default_rng(3)
    centers = rng.uniform(0, 10, (5, 3))
    truth = np.array([4.0, 5.0, 6.0])
    radii = np.linalg.norm(centers - truth, axis=1)
    est = sphere_locate(_obs(centers, radii)).as_array()

    def residual(p):
        lin = 2 * (centers[1:] - centers[0]) @ p
        rhs = (centers[1:] ** 2).sum(1) - (centers[0] ** 2).sum() - radii[1:] ** 2 + radii[0] ** 2
        return ((lin - rhs) ** 2).sum()

    axis = np.linspace(-0.05, 0.05, 11)
    grid = [est + np.array(o) for o in np.stack(np.meshgrid(axis, axis, axis), -1).reshape(-1, 3)]
    assert residual(est) <= min(residual(p) for p in grid) + 1e-12


def test_overhead():
    assert beacon_overhead(100, 4) == 25
    assert beacon_overhead(0, 4) == 0
    assert beacon_overhead(200, 4) == 2 * beacon_overhead(100, 4)
    with pytest.raises(DomainError):
        beacon_overhead(10, 0)


def test_beacon_log_first_last():
    log = BeaconLog(first_last_only=True)
    msgs = [BeaconMessage(7, Position(i, 0), i) for i in range(5)]
    for m in msgs:
        log.transmit(m)
        log.receive(0, m)
    assert log.kept(0) == [msgs[0], msgs[4]]
    assert log.discarded == 3
    assert log.overhead(1) == 5

    full = BeaconLog(first_last_only=False)
    for m in msgs:
        full.receive(0, m)
    assert full.kept(0) == msgs


def test_simulate_beacons_counts():
    tracks = {0: [Position(0, 0, 10), Position(5, 0, 10)], 1: [Position(100, 100, 10)] * 3}
    static = [Position(0, 0), Position(100, 100)]
    log = simulate_beacons(tracks, static, comm_range=20, first_last_only=True)
    assert len(log.transmitted) == 5
    assert log.overhead(2) == 2.5
    assert [m.sender for m in log.kept(0)] == [0, 0]
    assert [m.step for m in log.kept(1)] == [0, 2]
    # every kept message was actually within range
    for sid, spos in enumerate(static):
        assert all(distance(m.pos, spos) <= 20 for m in log.kept(sid))


def test_locators():
    towers = np.array([[0, 0], [2, 0], [1, 3]])
    out = CellIdLocator().fit(towers).predict([[True, True, True], [False, False, False]])
    assert out[0].tolist() == [1, 1, 0] and np.isnan(out[1]).all()
    centers = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
    assert SphereLocator().fit(centers).predict([[0, 1, 1, 1]]).tolist() == [[0, 0, 0]]
