"""Labeled planar landmarks, waypoints and goal-pose selection."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import MalformedScenario, NoFreeCell, UnknownLabel, UnreachableGoal
from .geometry import Pose2D, centroid, convex_hull
from .maps import OccupancyGrid
from .planning import raytrace_free_goal

STANDOFF = 1.0


@dataclass(frozen=True, eq=False)
class PlanarLandmark:
    label: str
    hull: np.ndarray

    def __post_init__(self):
        hull = np.asarray(self.hull, dtype=float).reshape(-1, 3)
        if len(hull) < 3:
            raise ValueError(f"landmark {self.label!r} needs at least 3 hull vertices")
        centered = hull - hull.mean(axis=0)
        # distance of the worst vertex to the best-fit plane
        normal = np.linalg.svd(centered)[2][-1]
        if np.abs(centered @ normal).max() > 1e-3:
            raise ValueError(f"landmark {self.label!r} vertices are not coplanar")
        hull.setflags(write=False)
        object.__setattr__(self, "hull", hull)

    @property
    def ground(self) -> np.ndarray:
        return self.hull[:, :2]


@dataclass(frozen=True)
class Waypoint:
    label: str
    pose: Pose2D


@dataclass(frozen=True)
class SemanticMap:
    landmarks: tuple = ()
    waypoints: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "landmarks", tuple(self.landmarks))
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        both = {w.label for w in self.waypoints} & {lm.label for lm in self.landmarks}
        if both:
            raise ValueError(f"labels name both a waypoint and a landmark: {sorted(both)}")

    @property
    def labels(self) -> set:
        return {w.label for w in self.waypoints} | {lm.label for lm in self.landmarks}

    def waypoint(self, label: str) -> Optional[Waypoint]:
        for w in self.waypoints:
            if w.label == label:
                return w
        return None

    def landmarks_for(self, label: str) -> list:
        return [lm for lm in self.landmarks if lm.label == label]


def closest_vertex(vertices: np.ndarray, p: Sequence[float]) -> np.ndarray:
    """Argmin of planar distance; ties go to the lowest index."""
    d = np.hypot(vertices[:, 0] - p[0], vertices[:, 1] - p[1])
    return vertices[int(np.argmin(d))]


def standoff_pose(robot: Pose2D, vertex: Sequence[float], standoff: float = STANDOFF) -> Pose2D:
    """Pose ``standoff`` meters from ``vertex`` on the robot-vertex line, facing the vertex.

    When the robot is already closer than ``standoff`` the point lies beyond
    the robot, on the same line.
    """
    vx, vy = float(vertex[0]), float(vertex[1])
    dx, dy = robot.x - vx, robot.y - vy
    n = math.hypot(dx, dy)
    if n < 1e-12:
        # robot sits on the vertex: back off along its own heading
        dx, dy, n = -math.cos(robot.theta), -math.sin(robot.theta), 1.0
    gx, gy = vx + standoff * dx / n, vy + standoff * dy / n
    return Pose2D(gx, gy, math.atan2(vy - gy, vx - gx))


def goal_for_label(sm: SemanticMap, grid: Optional[OccupancyGrid], robot: Pose2D, label: str,
                   inflation: float = 0.0) -> Pose2D:
    """Navigation goal for a semantic label.

    Waypoints are returned verbatim.  A single landmark yields a pose one
    meter from its closest ground-projected hull vertex, facing it; several
    landmarks sharing the label yield the centroid of the hull of all their
    projected vertices, with the heading of straight-line travel from the robot.
    An occupied goal is replaced by the first free cell towards the robot.
    """
    wp = sm.waypoint(label)
    if wp is not None:
        return wp.pose
    lms = sm.landmarks_for(label)
    if not lms:
        raise UnknownLabel(label)
    if len(lms) == 1:
        v = closest_vertex(lms[0].ground, (robot.x, robot.y))
        goal = standoff_pose(robot, v)
        facing = v
    else:
        pts = np.concatenate([lm.ground for lm in lms])
        c = centroid(convex_hull(pts))
        heading = math.atan2(c[1] - robot.y, c[0] - robot.x) if robot.distance_to(c) > 1e-12 else robot.theta
        goal = Pose2D(c[0], c[1], heading)
        facing = None
    if grid is None:
        return goal
    try:
        free = raytrace_free_goal(grid, inflation, (goal.x, goal.y), robot)
    except NoFreeCell as exc:
        raise UnreachableGoal(f"no free cell between the goal for {label!r} and the robot") from exc
    if free[0] == goal.x and free[1] == goal.y:
        return goal
    theta = goal.theta if facing is None else math.atan2(facing[1] - free[1], facing[0] - free[0])
    return Pose2D(free[0], free[1], theta)


def parse_semantic_line(parts: Sequence[str]):
    """``landmark <label> x1 y1 z1 ...`` or ``waypoint <label> x y theta``."""
    kind = parts[0]
    try:
        if kind == "landmark":
            coords = [float(v) for v in parts[2:]]
            if len(coords) % 3 or len(coords) < 9:
                raise MalformedScenario(f"landmark {parts[1]!r} needs 3+ xyz vertices")
            return PlanarLandmark(parts[1], np.array(coords).reshape(-1, 3))
        if kind == "waypoint":
            if len(parts) != 5:
                raise MalformedScenario("waypoint line needs: label x y theta")
            return Waypoint(parts[1], Pose2D(*(float(v) for v in parts[2:5])))
    except (IndexError, ValueError) as exc:
        raise MalformedScenario(f"bad {kind} line: {' '.join(parts)!r}: {exc}") from exc
    raise MalformedScenario(f"not a semantic line: {kind!r}")


def semantic_from_config(doc: str) -> SemanticMap:
    landmarks, waypoints = [], []
    for raw in doc.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        item = parse_semantic_line(line.split())
        (landmarks if isinstance(item, PlanarLandmark) else waypoints).append(item)
    try:
        return SemanticMap(tuple(landmarks), tuple(waypoints))
    except ValueError as exc:
        raise MalformedScenario(str(exc)) from exc
