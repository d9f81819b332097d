"""Seedable geometric model of a sensor field.

Worlds are immutable. All randomness goes through a PCG64 ``numpy.random.Generator``
(see :func:`wsnloc._validation.check_rng`), so a seed reproduces the same field on
any machine running the same numpy major version.
"""

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._validation import check_count, check_positive, check_rng
from .exceptions import ContractError, InvalidConfigError, NodeNotFoundError


@dataclass(frozen=True, order=True)
class Position:
    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "z"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ContractError(f"Position.{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)

    def as_array(self):
        return np.array([self.x, self.y, self.z])

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr, dtype=float).ravel()
        if arr.size == 2:
            return cls(arr[0], arr[1])
        if arr.size == 3:
            return cls(arr[0], arr[1], arr[2])
        raise ContractError(f"expected 2 or 3 coordinates, got {arr.size}")

    def __iter__(self):
        return iter((self.x, self.y, self.z))


class NodeKind(str, enum.Enum):
    ANCHOR = "anchor"
    UNKNOWN = "unknown"
    MOBILE_BEACON = "mobile_beacon"


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    pos: Position


def distance(a, b):
    """Euclidean distance between two positions (or coordinate triples)."""
    return math.dist(tuple(a), tuple(b))


@dataclass(frozen=True)
class World:
    width: float
    height: float
    comm_range: float
    nodes: tuple = ()
    seed: int = None

    def __post_init__(self):
        check_positive(self.width, "width")
        check_positive(self.height, "height")
        check_positive(self.comm_range, "comm_range")
        object.__setattr__(self, "nodes", tuple(self.nodes))
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise InvalidConfigError("node ids must be unique within a World")
        for n in self.nodes:
            if not (0 <= n.pos.x <= self.width and 0 <= n.pos.y <= self.height):
                raise InvalidConfigError(f"node {n.id} at {n.pos} lies outside the field")

    @cached_property
    def _index(self):
        return {n.id: i for i, n in enumerate(self.nodes)}

    def node(self, node_id):
        try:
            return self.nodes[self._index[node_id]]
        except KeyError:
            raise NodeNotFoundError(node_id) from None

    @property
    def anchors(self):
        return [n for n in self.nodes if n.kind is NodeKind.ANCHOR]

    @property
    def unknowns(self):
        return [n for n in self.nodes if n.kind is NodeKind.UNKNOWN]

    @cached_property
    def positions(self):
        """(n, 3) array of node positions in ``nodes`` order."""
        if not self.nodes:
            return np.zeros((0, 3))
        return np.array([n.pos.as_array() for n in self.nodes])

    @cached_property
    def adjacency(self):
        """Map node id -> sorted tuple of neighbor ids (distance <= comm_range)."""
        pts = self.positions
        ids = [n.id for n in self.nodes]
        if not ids:
            return {}
        d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1))
        within = d <= self.comm_range
        np.fill_diagonal(within, False)
        return {ids[i]: tuple(ids[j] for j in np.flatnonzero(within[i])) for i in range(len(ids))}


def neighbors(world, node_id):
    """Ids of nodes within communication range of ``node_id`` (never itself)."""
    world.node(node_id)
    return frozenset(world.adjacency[node_id])


def _grid_points(n, width, height):
    cols = max(1, math.ceil(math.sqrt(n * width / height)))
    rows = max(1, math.ceil(n / cols))
    xs = (np.arange(cols) + 0.5) * width / cols
    ys = (np.arange(rows) + 0.5) * height / rows
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])[:n]


def build_world(width, height, comm_range, n_anchors, n_unknown, seed=None, placement="uniform"):
    """Place anchors and unknown nodes in a ``width`` x ``height`` field.

    Anchors get ids ``0 .. n_anchors-1`` and unknowns follow. With
    ``placement="uniform"`` every node is i.i.d. uniform over the rectangle; with
    ``"grid"`` the unknown nodes sit on a regular lattice while anchors stay
    uniform.
    """
    width = check_positive(width, "width")
    height = check_positive(height, "height")
    comm_range = check_positive(comm_range, "comm_range")
    n_anchors = check_count(n_anchors, "n_anchors")
    n_unknown = check_count(n_unknown, "n_unknown")
    if placement not in ("uniform", "grid"):
        raise InvalidConfigError(f"unknown placement {placement!r}")

    rng = check_rng(seed)
    anchor_xy = rng.uniform((0, 0), (width, height), size=(n_anchors, 2))
    if placement == "uniform":
        unknown_xy = rng.uniform((0, 0), (width, height), size=(n_unknown, 2))
    else:
        unknown_xy = _grid_points(n_unknown, width, height)

    nodes = [Node(i, NodeKind.ANCHOR, Position(x, y)) for i, (x, y) in enumerate(anchor_xy)]
    nodes += [
        Node(n_anchors + i, NodeKind.UNKNOWN, Position(x, y)) for i, (x, y) in enumerate(unknown_xy)
    ]
    return World(width, height, comm_range, tuple(nodes), seed)


@dataclass(frozen=True)
class Trajectory:
    steps: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        ts = [t for t, _ in self.steps]
        if ts and (ts[0] != 0 or any(b <= a for a, b in zip(ts, ts[1:]))):
            raise ContractError("trajectory step indices must increase strictly from 0")

    def __len__(self):
        return len(self.steps)

    @property
    def positions(self):
        return np.array([p.as_array() for _, p in self.steps]).reshape(-1, 3)


def _reflect(v, lo, hi):
    span = hi - lo
    v = np.mod(v - lo, 2 * span)
    return lo + np.where(v > span, 2 * span - v, v)


def random_walk_trajectory(start, n_steps, step_sigma, bounds, rng, velocity=(0.0, 0.0)):
    """Planar random walk of ``n_steps`` positions starting at ``start``.

    Each step adds ``velocity`` plus isotropic Gaussian noise; the walk is
    reflected at the field walls so it never leaves ``[0, w] x [0, h]``.
    """
    rng = check_rng(rng)
    width, height = bounds
    pos = np.array([start.x, start.y], dtype=float)
    vel = np.asarray(velocity, dtype=float)
    steps = [(0, Position(*pos))]
    for t in range(1, n_steps):
        pos = pos + vel + rng.normal(0.0, step_sigma, size=2)
        pos = np.array([_reflect(pos[0], 0.0, width), _reflect(pos[1], 0.0, height)])
        steps.append((t, Position(*pos)))
    return Trajectory(tuple(steps))
