"""Wireless sensor network localization workbench."""

__version__ = "0.1.0"

from .world import Position, Node, NodeKind, World, Trajectory, build_world, distance, neighbors
from .exceptions import LocalizationError

__all__ = [
    "Position",
    "Node",
    "NodeKind",
    "World",
    "Trajectory",
    "build_world",
    "distance",
    "neighbors",
    "LocalizationError",
    "__version__",
]
