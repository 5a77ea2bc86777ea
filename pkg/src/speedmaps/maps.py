"""Occupancy grid and layered speed limits.

The static speed map is a list of hand-authored polygonal zones on top of a
default limit; dynamic layers add discs (e.g. around tracked people) that
expire.  Wherever several sources apply the most restrictive limit wins.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .errors import DegenerateInput, MalformedGrid, MalformedZone
from .geometry import (Polygon2D, Pose2D, convex_hull, distance_to_boundary, distance_to_polygon,
                       point_in_polygon)

ZONE_CLASSES = ("green", "yellow", "red")


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """Binary grid; ``cells[j, i]`` is True when cell (i, j) is occupied.

    Cell (0, 0) has its lower-left corner at ``origin``; i grows along the
    origin's x axis, j along its y axis.
    """

    resolution: float
    origin: Pose2D
    cells: np.ndarray

    def __post_init__(self):
        if not self.resolution > 0:
            raise MalformedGrid("resolution must be positive")
        cells = np.asarray(self.cells, dtype=bool)
        if cells.ndim != 2 or cells.shape[0] < 1 or cells.shape[1] < 1:
            raise MalformedGrid("grid needs at least one row and column")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @classmethod
    def empty(cls, width: int, height: int, resolution: float, origin: Pose2D = Pose2D()):
        return cls(resolution, origin, np.zeros((height, width), dtype=bool))

    def in_bounds(self, cell) -> bool:
        i, j = cell
        return 0 <= i < self.width and 0 <= j < self.height

    def cell_of(self, p: Sequence[float]) -> tuple:
        c, s = math.cos(self.origin.theta), math.sin(self.origin.theta)
        dx, dy = p[0] - self.origin.x, p[1] - self.origin.y
        lx, ly = c * dx + s * dy, -s * dx + c * dy
        return (math.floor(lx / self.resolution), math.floor(ly / self.resolution))

    def world_of(self, cell) -> np.ndarray:
        """Center of a cell in the map frame."""
        lx = (cell[0] + 0.5) * self.resolution
        ly = (cell[1] + 0.5) * self.resolution
        c, s = math.cos(self.origin.theta), math.sin(self.origin.theta)
        return np.array([self.origin.x + c * lx - s * ly, self.origin.y + s * lx + c * ly])

    def occupied(self, cell) -> bool:
        """Out-of-bounds cells count as occupied."""
        if not self.in_bounds(cell):
            return True
        return bool(self.cells[cell[1], cell[0]])

    def occupied_at(self, p: Sequence[float]) -> bool:
        return self.occupied(self.cell_of(p))

    def occupied_points(self, pts: np.ndarray) -> np.ndarray:
        """Vectorised ``occupied_at`` for an (..., 2) array of map points."""
        c, s = math.cos(self.origin.theta), math.sin(self.origin.theta)
        dx = pts[..., 0] - self.origin.x
        dy = pts[..., 1] - self.origin.y
        i = np.floor((c * dx + s * dy) / self.resolution).astype(np.int64)
        j = np.floor((-s * dx + c * dy) / self.resolution).astype(np.int64)
        inside = (i >= 0) & (i < self.width) & (j >= 0) & (j < self.height)
        out = np.ones(i.shape, dtype=bool)
        out[inside] = self.cells[j[inside], i[inside]]
        return out

    def clearance_points(self, pts: np.ndarray) -> np.ndarray:
        """Lower bound on the distance from each point to occupied (or off-map) space.

        Every point closer than this bound to ``p`` lies in a free cell.
        """
        edt = self.__dict__.get("_edt")
        if edt is None:
            padded = np.pad(self.cells, 1, constant_values=True)
            edt = ndimage.distance_transform_edt(~padded) * self.resolution
            self.__dict__["_edt"] = edt
        c, s = math.cos(self.origin.theta), math.sin(self.origin.theta)
        dx = pts[..., 0] - self.origin.x
        dy = pts[..., 1] - self.origin.y
        i = np.floor((c * dx + s * dy) / self.resolution).astype(np.int64) + 1
        j = np.floor((-s * dx + c * dy) / self.resolution).astype(np.int64) + 1
        inside = (i >= 0) & (i < edt.shape[1]) & (j >= 0) & (j < edt.shape[0])
        out = np.zeros(i.shape)
        # centre-to-centre distance, less half a diagonal at each end
        out[inside] = np.maximum(edt[j[inside], i[inside]] - math.sqrt(2.0) * self.resolution, 0.0)
        return out

    def inflated(self, radius: float) -> "OccupancyGrid":
        """Occupied cells dilated by a disc of ceil(radius / resolution) cells."""
        return self._inflated(round(float(radius), 9))

    def _inflated(self, radius: float) -> "OccupancyGrid":
        cache = self.__dict__.setdefault("_inflation_cache", {})
        if radius not in cache:
            r = math.ceil(radius / self.resolution - 1e-9) if radius > 0 else 0
            if r == 0:
                cache[radius] = self
            else:
                yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
                disc = xx * xx + yy * yy <= r * r
                cells = ndimage.binary_dilation(self.cells, structure=disc)
                cache[radius] = OccupancyGrid(self.resolution, self.origin, cells)
        return cache[radius]

    def to_text(self) -> str:
        o = self.origin
        lines = [f"grid {self.width} {self.height} {self.resolution!r} {o.x!r} {o.y!r} {o.theta!r}"]
        for j in range(self.height - 1, -1, -1):
            lines.append("".join("#" if v else "." for v in self.cells[j]))
        return "\n".join(lines) + "\n"


def parse_grid_header(line: str) -> tuple:
    parts = line.split()
    if len(parts) != 7 or parts[0] != "grid":
        raise MalformedGrid(f"bad grid header: {line!r}")
    try:
        w, h = int(parts[1]), int(parts[2])
        res, ox, oy, ot = (float(v) for v in parts[3:])
    except ValueError as exc:
        raise MalformedGrid(f"bad grid header: {line!r}") from exc
    if w < 1 or h < 1:
        raise MalformedGrid("grid width and height must be >= 1")
    if not res > 0:
        raise MalformedGrid("grid resolution must be positive")
    return w, h, res, Pose2D(ox, oy, ot)


def grid_from_rows(header: str, rows: Sequence[str]) -> OccupancyGrid:
    w, h, res, origin = parse_grid_header(header)
    if len(rows) != h:
        raise MalformedGrid(f"expected {h} rows, got {len(rows)}")
    cells = np.zeros((h, w), dtype=bool)
    for r, row in enumerate(rows):
        if len(row) != w:
            raise MalformedGrid(f"row {r} has {len(row)} cells, expected {w}")
        bad = set(row) - {"#", "."}
        if bad:
            raise MalformedGrid(f"unknown cell character(s) {sorted(bad)} in row {r}")
        # text row 0 is the top of the map
        cells[h - 1 - r] = np.frombuffer(row.encode(), dtype=np.uint8) == ord("#")
    return OccupancyGrid(res, origin, cells)


def load_grid(text: str) -> OccupancyGrid:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("%")]
    if not lines or not lines[0].startswith("grid"):
        raise MalformedGrid("missing 'grid' header line")
    return grid_from_rows(lines[0], lines[1:])


@dataclass(frozen=True)
class SpeedZone:
    region: Polygon2D
    limit: float
    zone_class: str = "yellow"

    def __post_init__(self):
        if not self.limit > 0:
            raise MalformedZone(f"zone limit must be positive, got {self.limit}")


@dataclass(frozen=True)
class StaticSpeedMap:
    zones: tuple = ()
    default_limit: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "zones", tuple(self.zones))
        if not self.default_limit > 0:
            raise MalformedZone("default limit must be positive")

    def limit_at(self, p) -> float:
        return static_limit_at(self, p)

    def zone_class_at(self, p) -> str:
        """Class of the most restrictive zone at ``p``; uncovered space is yellow."""
        best = None
        for z in self.zones:
            if point_in_polygon(p, z.region) and (best is None or z.limit < best.limit):
                best = z
        return best.zone_class if best is not None else "yellow"

    def limit_near(self, p, radius: float) -> float:
        """Lower bound on the limit anywhere within ``radius`` of ``p``.

        Stricter zones within reach lower it, and so does the default when a
        faster zone's edge is within reach (conservative where zones abut).
        """
        lim = static_limit_at(self, p)
        for z in self.zones:
            if z.limit < lim and distance_to_polygon(p, z.region) <= radius:
                lim = z.limit
        if self.default_limit < lim:
            for z in self.zones:
                if z.limit > self.default_limit and point_in_polygon(p, z.region) \
                        and distance_to_boundary(p, z.region) <= radius:
                    lim = self.default_limit
                    break
        return lim


def static_limit_at(m: StaticSpeedMap, p) -> float:
    """Minimum limit over zones containing ``p``; the default where none does."""
    limits = [z.limit for z in m.zones if point_in_polygon(p, z.region)]
    return min(limits) if limits else m.default_limit


@dataclass(frozen=True)
class SpeedLayer:
    """Time-limited set of speed-limit discs: ``(center, radius, limit)``."""

    discs: tuple = ()
    expiry: float = math.inf

    def __post_init__(self):
        discs = tuple(((float(c[0]), float(c[1])), float(r), float(lim)) for c, r, lim in self.discs)
        for _, r, lim in discs:
            if not r > 0 or lim < 0:
                raise ValueError("disc radius must be > 0 and limit >= 0")
        object.__setattr__(self, "discs", discs)

    def active(self, now: float) -> bool:
        return now <= self.expiry

    def limit_at(self, p, now: float, margin: float = 0.0) -> float:
        lim = math.inf
        if not self.active(now):
            return lim
        for (cx, cy), r, dl in self.discs:
            if math.hypot(p[0] - cx, p[1] - cy) <= r + margin:
                lim = min(lim, dl)
        return lim


def effective_limit(m: StaticSpeedMap, layers: Iterable[SpeedLayer], p, now: float) -> float:
    lim = static_limit_at(m, p)
    for layer in layers:
        lim = min(lim, layer.limit_at(p, now))
    return lim


def effective_limit_near(m: StaticSpeedMap, layers: Iterable[SpeedLayer], p, now: float,
                         radius: float) -> float:
    """Like ``effective_limit`` but for any point within ``radius`` of ``p``."""
    lim = m.limit_near(p, radius)
    for layer in layers:
        lim = min(lim, layer.limit_at(p, now, margin=radius))
    return lim


def parse_zone_line(parts: Sequence[str]) -> SpeedZone:
    if len(parts) < 3:
        raise MalformedZone("zone line needs a class, a limit and vertices")
    cls = parts[1].lower()
    if cls not in ZONE_CLASSES:
        raise MalformedZone(f"unknown zone class {parts[1]!r}")
    try:
        limit = float(parts[2])
        coords = [float(v) for v in parts[3:]]
    except ValueError as exc:
        raise MalformedZone(f"non-numeric zone value in {' '.join(parts)!r}") from exc
    if not limit > 0:
        raise MalformedZone(f"zone limit must be positive, got {limit}")
    if len(coords) % 2:
        raise MalformedZone("zone vertex list has an odd number of coordinates")
    if len(coords) < 6:
        raise MalformedZone("zone needs at least 3 vertices")
    try:
        hull = convex_hull(list(zip(coords[0::2], coords[1::2])))
    except DegenerateInput as exc:
        raise MalformedZone(str(exc)) from exc
    return SpeedZone(hull, limit, cls)


def zones_from_config(doc: str) -> StaticSpeedMap:
    """Parse ``zone <class> <limit> x1 y1 ...`` and ``default <limit>`` lines."""
    zones = []
    default = None
    for lineno, raw in enumerate(doc.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "zone":
            zones.append(parse_zone_line(parts))
        elif parts[0] == "default":
            try:
                default = float(parts[1])
            except (IndexError, ValueError) as exc:
                raise MalformedZone(f"line {lineno}: bad default limit") from exc
            if not default > 0:
                raise MalformedZone(f"line {lineno}: default limit must be positive")
        else:
            raise MalformedZone(f"line {lineno}: unexpected keyword {parts[0]!r}")
    if default is None:
        return StaticSpeedMap(tuple(zones))
    return StaticSpeedMap(tuple(zones), default)


def zones_to_config(m: StaticSpeedMap) -> str:
    lines = [f"default {m.default_limit!r}"]
    for z in m.zones:
        coords = " ".join(f"{x!r} {y!r}" for x, y in z.region.vertices)
        lines.append(f"zone {z.zone_class} {z.limit!r} {coords}")
    return "\n".join(lines) + "\n"
