"""Grid planning, path following and the speed governor."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import GoalOccupied, NoFreeCell, NoPath, StartOccupied
from .geometry import Pose2D, wrap_angle
from .maps import OccupancyGrid, SpeedLayer, StaticSpeedMap, effective_limit

SQRT2 = math.sqrt(2.0)
_MOVES = ((1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
          (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2))


@dataclass(frozen=True, eq=False)
class Path:
    """Waypoints in map meters; ``cost`` is in cell units (1 straight, sqrt2 diagonal)."""

    waypoints: np.ndarray
    cost: float = 0.0
    cells: tuple = ()

    def __post_init__(self):
        wp = np.asarray(self.waypoints, dtype=float).reshape(-1, 2)
        wp.setflags(write=False)
        object.__setattr__(self, "waypoints", wp)

    def __len__(self):
        return len(self.waypoints)

    @property
    def arc_lengths(self) -> np.ndarray:
        """Cumulative arc length at each waypoint."""
        seg = np.hypot(*np.diff(self.waypoints, axis=0).T) if len(self) > 1 else np.zeros(0)
        return np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self.arc_lengths[-1])


@dataclass(frozen=True)
class SpeedProfile:
    """Guidance speed as a function of robot-human distance."""

    d_safe: float = 0.1
    d_peak: float = 0.9
    d_guide: float = 1.7
    v_safe: float = 0.1
    v_peak: float = 1.0

    def __post_init__(self):
        if not 0 < self.d_safe < self.d_peak < self.d_guide:
            raise ValueError("need 0 < d_safe < d_peak < d_guide")
        if not 0 < self.v_safe <= self.v_peak:
            raise ValueError("need 0 < v_safe <= v_peak")


@dataclass(frozen=True)
class VelocityCommand:
    v: float = 0.0
    omega: float = 0.0


def octile(a, b) -> float:
    dx, dy = abs(a[0] - b[0]), abs(a[1] - b[1])
    return max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)


def _neighbors(occ: np.ndarray, cell):
    h, w = occ.shape
    i, j = cell
    for di, dj, c in _MOVES:
        ni, nj = i + di, j + dj
        if not (0 <= ni < w and 0 <= nj < h) or occ[nj, ni]:
            continue
        # no corner cutting: both orthogonal cells must be free for a diagonal
        if di and dj and (occ[j, ni] or occ[nj, i]):
            continue
        yield (ni, nj), c


def astar(occ: np.ndarray, start: tuple, goal: tuple) -> tuple:
    """A* over a boolean (h, w) occupancy array; returns (cells, cost)."""
    g = {start: 0.0}
    parent = {start: None}
    counter = 0
    frontier = [(octile(start, goal), 0.0, counter, start)]
    closed = set()
    while frontier:
        _, gc, _, cur = heapq.heappop(frontier)
        if cur in closed:
            continue
        if cur == goal:
            cells = []
            while cur is not None:
                cells.append(cur)
                cur = parent[cur]
            return tuple(reversed(cells)), gc
        closed.add(cur)
        for nb, c in _neighbors(occ, cur):
            ng = gc + c
            if ng < g.get(nb, math.inf) - 1e-12:
                g[nb] = ng
                parent[nb] = cur
                counter += 1
                heapq.heappush(frontier, (ng + octile(nb, goal), ng, counter, nb))
    raise NoPath(f"no path from cell {start} to cell {goal}")


def plan_path(grid: OccupancyGrid, inflation: float, start, goal) -> Path:
    """8-connected A* on the inflated grid, from the cell of ``start`` to that of ``goal``."""
    inf = grid.inflated(inflation)
    s, g = grid.cell_of(start), grid.cell_of(goal)
    if inf.occupied(s):
        raise StartOccupied(f"start {tuple(start)} is in an occupied or inflated cell")
    if inf.occupied(g):
        raise GoalOccupied(f"goal {tuple(goal)} is in an occupied or inflated cell")
    cells, cost = astar(inf.cells, s, g)
    return Path(np.array([grid.world_of(c) for c in cells]), cost, cells)


def closest_index(path: Path, p) -> int:
    d = np.hypot(path.waypoints[:, 0] - p[0], path.waypoints[:, 1] - p[1])
    return int(np.argmin(d))


def follow_path(path: Path, pose: Pose2D, lookahead: float) -> tuple:
    """Pure-pursuit style target selection.

    Returns ``(bearing_error, remaining_distance)``; a positive bearing error
    means the target lies to the left.
    """
    if len(path) == 0:
        raise ValueError("empty path")
    arcs = path.arc_lengths
    i = closest_index(path, (pose.x, pose.y))
    ahead = np.nonzero(arcs[i:] - arcs[i] >= lookahead)[0]
    j = i + int(ahead[0]) if len(ahead) else len(path) - 1
    tx, ty = path.waypoints[j]
    remaining = math.hypot(path.waypoints[i, 0] - pose.x, path.waypoints[i, 1] - pose.y)
    remaining += float(arcs[-1] - arcs[i])
    if math.hypot(tx - pose.x, ty - pose.y) < 1e-12:
        return 0.0, remaining
    return wrap_angle(math.atan2(ty - pose.y, tx - pose.x) - pose.theta), remaining


def guidance_speed(d: float, p: SpeedProfile) -> float:
    """Piecewise-linear speed profile over robot-human distance."""
    if d < p.d_safe:
        return p.v_safe
    if d <= p.d_peak:
        return p.v_safe + (p.v_peak - p.v_safe) * (d - p.d_safe) / (p.d_peak - p.d_safe)
    if d < p.d_guide:
        return p.v_peak * (p.d_guide - d) / (p.d_guide - p.d_peak)
    return 0.0


def rate_limit(v: float, prev_v: float, a_max: float, dt: float) -> float:
    step = a_max * dt
    return max(0.0, min(prev_v + step, max(prev_v - step, v)))


def governed_speed(nominal: float, static_map: StaticSpeedMap, layers: Iterable[SpeedLayer],
                   p, now: float, prev_v: float, a_max: float, dt: float) -> float:
    """Cap by the layered speed map, then by the acceleration bound, then at zero."""
    if not (dt > 0 and a_max > 0):
        raise ValueError("dt and a_max must be positive")
    v = min(nominal, effective_limit(static_map, layers, p, now))
    return rate_limit(v, prev_v, a_max, dt)


def following_goal(robot: Pose2D, person: Sequence[float], follow_dist: float) -> np.ndarray:
    """Point ``follow_dist`` from the person, on the ray from the person towards the robot."""
    if not follow_dist > 0:
        raise ValueError("follow_dist must be positive")
    dx, dy = robot.x - person[0], robot.y - person[1]
    n = math.hypot(dx, dy)
    if n < 1e-6:
        return np.array([robot.x, robot.y])
    return np.array([person[0] + follow_dist * dx / n, person[1] + follow_dist * dy / n])


def bresenham(a: tuple, b: tuple) -> list:
    """Grid cells on the line from cell ``a`` to cell ``b``, both included."""
    x0, y0 = a
    x1, y1 = b
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    cells = []
    while True:
        cells.append((x0, y0))
        if (x0, y0) == (x1, y1):
            return cells
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def raytrace_free_goal(grid: OccupancyGrid, inflation: float, goal, robot: Pose2D) -> np.ndarray:
    """Walk from the goal's cell towards the robot; return the first free cell center."""
    inf = grid.inflated(inflation)
    gcell = grid.cell_of(goal)
    if not inf.occupied(gcell):
        return np.asarray(goal, dtype=float)
    for cell in bresenham(gcell, grid.cell_of((robot.x, robot.y))):
        if not inf.occupied(cell):
            return grid.world_of(cell)
    raise NoFreeCell(f"every cell between {tuple(goal)} and the robot is occupied")


def heading_command(bearing_error: float, k: float = 2.0, omega_max: float = 1.5) -> float:
    return max(-omega_max, min(omega_max, k * bearing_error))


def stopping_speed(distance: float, a_max: float) -> float:
    """Largest speed from which the robot can still stop within ``distance``."""
    return math.sqrt(2.0 * a_max * max(0.0, distance))
