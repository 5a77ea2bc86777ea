"""Rigid transforms, planar poses and 2D polygon utilities.

Conventions: quaternions are stored (w, x, y, z), frames are right-handed and
the map frame is z-up.  ``Transform3D`` maps points from its child frame into
its parent frame, so ``compose(map_T_a, a_T_b)`` yields ``map_T_b``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateInput, DegenerateProjection

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Map an angle into (-pi, pi]."""
    a = math.remainder(a, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    return a


def quat_multiply(q, r):
    w0, x0, y0, z0 = q
    w1, x1, y1, z1 = r
    return (
        w0 * w1 - x0 * x1 - y0 * y1 - z0 * z1,
        w0 * x1 + x0 * w1 + y0 * z1 - z0 * y1,
        w0 * y1 - x0 * z1 + y0 * w1 + z0 * x1,
        w0 * z1 + x0 * y1 - y0 * x1 + z0 * w1,
    )


def quat_rotate(q, v):
    """Rotate 3-vector ``v`` by unit quaternion ``q``."""
    w, x, y, z = q
    vx, vy, vz = v
    # t = 2 * cross(q_vec, v)
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return (
        vx + w * tx + (y * tz - z * ty),
        vy + w * ty + (z * tx - x * tz),
        vz + w * tz + (x * ty - y * tx),
    )


def quat_from_axis_angle(axis: Sequence[float], angle: float):
    ax = np.asarray(axis, dtype=float)
    n = np.linalg.norm(ax)
    if n == 0.0:
        return (1.0, 0.0, 0.0, 0.0)
    ax = ax / n
    s = math.sin(angle / 2.0)
    return (math.cos(angle / 2.0), ax[0] * s, ax[1] * s, ax[2] * s)


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


@dataclass(frozen=True)
class Transform3D:
    """Rigid transform: translation in meters plus unit quaternion (w, x, y, z)."""

    translation: tuple = (0.0, 0.0, 0.0)
    rotation: tuple = (1.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        t = tuple(float(v) for v in self.translation)
        q = tuple(float(v) for v in self.rotation)
        if len(t) != 3 or len(q) != 4:
            raise ValueError("translation needs 3 values and rotation 4")
        n = math.sqrt(sum(c * c for c in q))
        if not math.isfinite(n) or n == 0.0:
            raise ValueError("rotation quaternion must be finite and nonzero")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", tuple(c / n for c in q))

    @classmethod
    def identity(cls) -> "Transform3D":
        return cls()

    @classmethod
    def from_translation(cls, x: float, y: float, z: float) -> "Transform3D":
        return cls((x, y, z))

    @classmethod
    def from_pose2d(cls, pose: "Pose2D", z: float = 0.0) -> "Transform3D":
        return cls((pose.x, pose.y, z), quat_from_axis_angle((0, 0, 1), pose.theta))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Transform3D":
        m = np.asarray(m, dtype=float)
        r = m[:3, :3]
        # Shepperd's method, picking the largest pivot for stability.
        tr = np.trace(r)
        if tr > 0:
            s = math.sqrt(tr + 1.0) * 2
            q = (0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s)
        elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
            s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2
            q = ((r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s)
        elif r[1, 1] > r[2, 2]:
            s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2
            q = ((r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s)
        else:
            s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2
            q = ((r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s)
        return cls(tuple(m[:3, 3]), q)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.rotation)
        m[:3, 3] = self.translation
        return m

    def apply(self, point: Sequence[float]) -> tuple:
        rx, ry, rz = quat_rotate(self.rotation, point)
        tx, ty, tz = self.translation
        return (rx + tx, ry + ty, rz + tz)

    def rotation_angle(self) -> float:
        """Angle of the rotation part, in [0, pi]."""
        w = min(1.0, abs(self.rotation[0]))
        vec = math.sqrt(sum(c * c for c in self.rotation[1:]))
        return 2.0 * math.atan2(vec, w)

    def isclose(self, other: "Transform3D", tol: float = 1e-9) -> bool:
        dt = max(abs(a - b) for a, b in zip(self.translation, other.translation))
        return dt <= tol and compose(invert(self), other).rotation_angle() <= tol

    def __matmul__(self, other: "Transform3D") -> "Transform3D":
        return compose(self, other)


def compose(a: Transform3D, b: Transform3D) -> Transform3D:
    """Return ``a * b``: apply ``b`` first, then ``a``."""
    rt = quat_rotate(a.rotation, b.translation)
    t = tuple(r + s for r, s in zip(rt, a.translation))
    return Transform3D(t, quat_multiply(a.rotation, b.rotation))


def invert(t: Transform3D) -> Transform3D:
    w, x, y, z = t.rotation
    qi = (w, -x, -y, -z)
    ti = quat_rotate(qi, t.translation)
    return Transform3D(tuple(-c for c in ti), qi)


@dataclass(frozen=True)
class Pose2D:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def distance_to(self, p: Sequence[float]) -> float:
        return math.hypot(p[0] - self.x, p[1] - self.y)


def planar_pose(t: Transform3D) -> Pose2D:
    """Project a 3D transform onto the floor plane.

    The heading comes from the body x-axis projected onto z=0.
    """
    ax = quat_rotate(t.rotation, (1.0, 0.0, 0.0))
    n = math.hypot(ax[0], ax[1])
    if n < 1e-6:
        raise DegenerateProjection(f"body x-axis projects to norm {n:.3g} on the floor plane")
    return Pose2D(t.translation[0], t.translation[1], math.atan2(ax[1], ax[0]))


def qr_localize(map_T_qr: Transform3D, cam_T_qr: Transform3D, robot_T_cam: Transform3D) -> Pose2D:
    """Robot pose in the map from one tag detection.

    map_T_robot = map_T_qr * inv(cam_T_qr) * inv(robot_T_cam)
    """
    map_T_robot = compose(compose(map_T_qr, invert(cam_T_qr)), invert(robot_T_cam))
    return planar_pose(map_T_robot)


@dataclass(frozen=True)
class Polygon2D:
    vertices: tuple

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple((float(x), float(y)) for x, y in self.vertices))

    def __len__(self):
        return len(self.vertices)

    def as_array(self) -> np.ndarray:
        return np.array(self.vertices, dtype=float).reshape(-1, 2)

    def signed_area(self) -> float:
        v = self.as_array()
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: Iterable[Sequence[float]]) -> Polygon2D:
    """Andrew's monotone chain; CCW, collinear and duplicate points dropped."""
    pts = sorted({(float(p[0]), float(p[1])) for p in points})
    if len(pts) < 3:
        raise DegenerateInput(f"need at least 3 distinct points, got {len(pts)}")
    lower: list = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateInput("all points are collinear")
    return Polygon2D(tuple(hull))


def centroid(poly: Polygon2D) -> np.ndarray:
    """Area-weighted centroid."""
    v = poly.as_array()
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    c = x * yn - xn * y
    area = 0.5 * c.sum()
    if abs(area) < 1e-12:
        raise DegenerateInput(f"polygon area {area:.3g} too small for a centroid")
    return np.array([((x + xn) * c).sum(), ((y + yn) * c).sum()]) / (6.0 * area)


def _point_segment_distance(p, a, b) -> float:
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    L2 = dx * dx + dy * dy
    if L2 == 0.0:
        return math.hypot(p[0] - ax, p[1] - ay)
    t = max(0.0, min(1.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / L2))
    return math.hypot(p[0] - ax - t * dx, p[1] - ay - t * dy)


def point_in_polygon(p: Sequence[float], poly: Polygon2D, eps: float = 1e-12) -> bool:
    """Even-odd test; points on the boundary count as inside."""
    verts = poly.vertices
    n = len(verts)
    px, py = float(p[0]), float(p[1])
    inside = False
    for i in range(n):
        a = verts[i]
        b = verts[(i + 1) % n]
        if _point_segment_distance((px, py), a, b) <= eps:
            return True
        if (a[1] > py) != (b[1] > py):
            xint = a[0] + (py - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
            if px < xint:
                inside = not inside
    return inside


def distance_to_boundary(p: Sequence[float], poly: Polygon2D) -> float:
    verts = poly.vertices
    return min(_point_segment_distance(p, verts[i], verts[(i + 1) % len(verts)])
               for i in range(len(verts)))


def distance_to_polygon(p: Sequence[float], poly: Polygon2D) -> float:
    """Zero inside or on the boundary, else distance to the nearest edge."""
    if point_in_polygon(p, poly):
        return 0.0
    return distance_to_boundary(p, poly)
