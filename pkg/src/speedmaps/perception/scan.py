"""Laser scans and their segmentation into point clusters."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..geometry import Pose2D

CHANNELS = ("ankle", "torso")


@dataclass(frozen=True, eq=False)
class LaserScan:
    sensor_pose: Pose2D
    channel: str
    angle_min: float
    angle_increment: float
    ranges: np.ndarray
    range_max: float
    stamp: float = 0.0

    def __post_init__(self):
        r = np.asarray(self.ranges, dtype=float)
        if self.channel not in CHANNELS:
            raise ValueError(f"channel must be one of {CHANNELS}")
        if r.ndim != 1 or len(r) < 2:
            raise ValueError("a scan needs at least 2 ranges")
        if not self.angle_increment > 0:
            raise ValueError("angle_increment must be positive")
        if (r < 0).any():
            raise ValueError("ranges must be non-negative")
        r.setflags(write=False)
        object.__setattr__(self, "ranges", r)

    @property
    def angles(self) -> np.ndarray:
        """Beam angles in the sensor frame."""
        return self.angle_min + self.angle_increment * np.arange(len(self.ranges))

    def returns(self) -> np.ndarray:
        return self.ranges < self.range_max

    def points(self) -> np.ndarray:
        """All beam endpoints in the map frame, max-range beams included."""
        a = self.angles + self.sensor_pose.theta
        return np.column_stack([self.sensor_pose.x + self.ranges * np.cos(a),
                                self.sensor_pose.y + self.ranges * np.sin(a)])


@dataclass(frozen=True, eq=False)
class Segment:
    points: np.ndarray
    channel: str

    def __len__(self):
        return len(self.points)


def segment_scan(scan: LaserScan, gap: float) -> list:
    """Split a scan into maximal runs of consecutive returns closer than ``gap``."""
    if not gap > 0:
        raise ValueError("gap must be positive")
    pts = scan.points()
    valid = scan.returns()
    step = np.hypot(*np.diff(pts, axis=0).T)
    # link k joins beam k and k+1
    link = valid[:-1] & valid[1:] & (step < gap)
    segments = []
    start = None
    for k in range(len(pts)):
        if not valid[k]:
            start = None
            continue
        if start is None:
            start = k
        if k == len(pts) - 1 or not link[k]:
            segments.append(Segment(pts[start:k + 1].copy(), scan.channel))
            start = None
    return segments


def scan_to_csv_row(scan: LaserScan) -> str:
    vals = [repr(float(scan.stamp)), scan.channel, repr(float(scan.angle_min)),
            repr(float(scan.angle_increment))]
    vals += [repr(float(r)) for r in scan.ranges]
    return ",".join(vals)


def scans_to_csv(scans: Sequence[LaserScan]) -> str:
    return "".join(scan_to_csv_row(s) + "\n" for s in scans)


def scans_from_csv(text: str, sensor_pose: Pose2D = Pose2D(), range_max: float = math.inf) -> list:
    """Parse ``stamp,channel,angle_min,angle_increment,r0,r1,...`` rows.

    The row format has no pose or range limit, so those come from the caller.
    """
    scans = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("stamp"):
            continue
        f = line.split(",")
        scans.append(LaserScan(sensor_pose, f[1], float(f[2]), float(f[3]),
                               np.array([float(v) for v in f[4:]]), range_max, float(f[0])))
    return scans
