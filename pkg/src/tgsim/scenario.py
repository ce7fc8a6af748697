"""Scenario files: geometry, limits, link configuration."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import geometry
from .link import ChannelConfig
from .trajectory import LimitSet


class SchemaError(ValueError):
    """Scenario file is structurally invalid."""


class GeometryError(ValueError):
    """Scenario geometry is inconsistent (placement, containment)."""


@dataclass(frozen=True)
class Scenario:
    name: str
    bounds: np.ndarray
    obstacles: tuple[np.ndarray, ...]
    start_pose: tuple[float, float, float]
    goal: tuple[float, float, float]  # x, y, radius
    limits: LimitSet
    channel: ChannelConfig
    handover_delay_ms: float = 35700.0

    def __post_init__(self):
        self.bounds.setflags(write=False)
        for ob in self.obstacles:
            ob.setflags(write=False)

    @property
    def goal_xy(self) -> tuple[float, float]:
        return self.goal[0], self.goal[1]

    @property
    def goal_radius(self) -> float:
        return self.goal[2]

    def start_goal_distance(self) -> float:
        return float(np.hypot(self.start_pose[0] - self.goal[0],
                              self.start_pose[1] - self.goal[1]))

    def contains(self, x: float, y: float) -> bool:
        return geometry.point_in_polygon(x, y, self.bounds)

    def in_obstacle(self, x: float, y: float) -> bool:
        return any(geometry.point_in_polygon(x, y, ob) for ob in self.obstacles)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "bounds": self.bounds.tolist(),
            "obstacles": [ob.tolist() for ob in self.obstacles],
            "start_pose": list(self.start_pose),
            "goal": {"x": self.goal[0], "y": self.goal[1], "radius": self.goal[2]},
            "limits": self.limits.to_payload(),
            "channel": self.channel.to_dict(),
            "handover_delay_ms": self.handover_delay_ms,
        }


def scenario_from_dict(data: dict) -> Scenario:
    required = {"name", "bounds", "obstacles", "start_pose", "goal", "limits", "channel"}
    if not isinstance(data, dict) or not required.issubset(data):
        missing = required - set(data) if isinstance(data, dict) else required
        raise SchemaError(f"scenario missing fields: {sorted(missing)}")
    try:
        bounds = geometry.normalize_polygon(data["bounds"])
        obstacles = tuple(geometry.normalize_polygon(ob) for ob in data["obstacles"])
        sx, sy, spsi = (float(v) for v in data["start_pose"])
        goal = (float(data["goal"]["x"]), float(data["goal"]["y"]),
                float(data["goal"].get("radius", 1.0)))
        limits = LimitSet.from_payload(data["limits"])
        channel = ChannelConfig.from_dict(data["channel"])
        handover = float(data.get("handover_delay_ms", 35700.0))
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"bad scenario field: {e}") from e

    scn = Scenario(name=str(data["name"]), bounds=bounds, obstacles=obstacles,
                   start_pose=(sx, sy, spsi), goal=goal, limits=limits,
                   channel=channel, handover_delay_ms=handover)
    if not scn.contains(sx, sy):
        raise GeometryError("start pose outside scenario bounds")
    if scn.in_obstacle(sx, sy):
        raise GeometryError("start pose inside an obstacle")
    if not scn.contains(goal[0], goal[1]):
        raise GeometryError("goal outside scenario bounds")
    if scn.in_obstacle(goal[0], goal[1]):
        raise GeometryError("goal inside an obstacle")
    if goal[2] <= 0:
        raise GeometryError("goal radius must be positive")
    return scn


def load_scenario(path) -> Scenario:
    """Load and validate a scenario JSON file."""
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"scenario file is not valid JSON: {e}") from e
    return scenario_from_dict(data)


def bundled_scenario(name: str = "construction_site") -> Scenario:
    """Load a scenario shipped with the package."""
    ref = resources.files("tgsim").joinpath(f"scenarios/{name}.json")
    return scenario_from_dict(json.loads(ref.read_text()))


def resolve_scenario(spec: str | Path) -> Scenario:
    """Path if it exists on disk, otherwise a bundled scenario name."""
    p = Path(spec)
    if p.exists():
        return load_scenario(p)
    return bundled_scenario(str(spec))
