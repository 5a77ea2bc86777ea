"""Deterministic fixed-step 2D world for the guide robot.

One run: cast both laser channels, detect people, optionally detect a QR
anchor, tick the behavior, log, then advance the robot and pedestrians.
All randomness comes from one seeded generator, so a config and a seed
fully determine the log.
"""
from __future__ import annotations

import copy
import io
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .behavior import BehaviorEvent, BehaviorParams, Controller, EventKind, GuideRobot
from .geometry import (Pose2D, Transform3D, compose, invert, qr_localize, quat_rotate,
                       wrap_angle)
from .maps import OccupancyGrid, StaticSpeedMap
from .perception import (DetectorConfig, LaserScan, Track, Tracker, TrackerConfig, detect_legs,
                         detect_torsos)
from .planning import VelocityCommand
from .qr_payload import parse_payload
from .semantic import SemanticMap


@dataclass(frozen=True)
class UnicycleState:
    pose: Pose2D
    v: float = 0.0
    omega: float = 0.0


def step_robot(state: UnicycleState, cmd: VelocityCommand, dt: float) -> UnicycleState:
    """Forward-Euler unicycle step; the command becomes the current velocity."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    p = state.pose
    x = p.x + cmd.v * math.cos(p.theta) * dt
    y = p.y + cmd.v * math.sin(p.theta) * dt
    return UnicycleState(Pose2D(x, y, p.theta + cmd.omega * dt), cmd.v, cmd.omega)


@dataclass
class PedestrianAgent:
    """A simulated person.

    behavior is ``stand``, ``scripted`` (``waypoints`` holds (t, x, y)
    triples, linearly interpolated) or ``follow_robot``.
    """

    id: str
    behavior: str = "stand"
    position: tuple = (0.0, 0.0)
    heading: float = 0.0
    waypoints: tuple = ()
    preferred_speed: float = 1.0
    reaction_delay: float = 0.5
    follow_gain: float = 1.0
    follow_gap: float = 0.6
    engage_dist: float = 3.0
    leg_radius: float = 0.06
    leg_separation: float = 0.30
    torso_major: float = 0.15
    torso_minor: float = 0.10

    def __post_init__(self):
        if self.behavior not in ("stand", "scripted", "follow_robot"):
            raise ValueError(f"unknown pedestrian behavior {self.behavior!r}")
        if min(self.leg_radius, self.leg_separation, self.torso_major, self.torso_minor) <= 0:
            raise ValueError("pedestrian body dimensions must be positive")
        if self.behavior == "scripted":
            if not self.waypoints:
                raise ValueError("scripted pedestrian needs waypoints")
            self.waypoints = tuple(sorted(tuple(map(float, w)) for w in self.waypoints))
            self.position = self.waypoints[0][1:]
            if len(self.waypoints) > 1:
                (_, x0, y0), (_, x1, y1) = self.waypoints[:2]
                if (x0, y0) != (x1, y1):
                    self.heading = math.atan2(y1 - y0, x1 - x0)
        self.position = (float(self.position[0]), float(self.position[1]))

    def scripted_position(self, t: float) -> tuple:
        wps = self.waypoints
        if t <= wps[0][0]:
            return wps[0][1:]
        for (t0, x0, y0), (t1, x1, y1) in zip(wps, wps[1:]):
            if t <= t1:
                u = (t - t0) / (t1 - t0) if t1 > t0 else 1.0
                return (x0 + u * (x1 - x0), y0 + u * (y1 - y0))
        return wps[-1][1:]

    def legs(self) -> list:
        """Leg disc centers, offset perpendicular to the heading."""
        h = self.leg_separation / 2.0
        nx, ny = -math.sin(self.heading), math.cos(self.heading)
        x, y = self.position
        return [(x + h * nx, y + h * ny), (x - h * nx, y - h * ny)]


def step_pedestrian(ped: PedestrianAgent, t: float, dt: float, robot_xy: tuple,
                    robot_trail: Sequence) -> PedestrianAgent:
    """Advance one pedestrian from time ``t`` to ``t + dt``."""
    x, y = ped.position
    if ped.behavior == "stand":
        return ped
    if ped.behavior == "scripted":
        nx, ny = ped.scripted_position(t + dt)
    else:
        if math.hypot(robot_xy[0] - x, robot_xy[1] - y) > ped.engage_dist:
            return ped
        tx, ty = delayed_position(robot_trail, t - ped.reaction_delay)
        d = math.hypot(tx - x, ty - y)
        speed = min(ped.preferred_speed, ped.follow_gain * max(0.0, d - ped.follow_gap))
        step = min(speed * dt, d)
        if step <= 0.0:
            return ped
        nx, ny = x + step * (tx - x) / d, y + step * (ty - y) / d
    # copy rather than dataclasses.replace: __post_init__ would reset scripted agents
    out = copy.copy(ped)
    out.position = (float(nx), float(ny))
    if math.hypot(nx - x, ny - y) > 1e-9:
        out.heading = math.atan2(ny - y, nx - x)
    return out


def delayed_position(trail: Sequence, t: float) -> tuple:
    """Robot position at time ``t`` from a (time, x, y) trail; clamps to its ends."""
    if t <= trail[0][0]:
        return trail[0][1:]
    lo, hi = 0, len(trail) - 1
    if t >= trail[hi][0]:
        return trail[hi][1:]
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if trail[mid][0] <= t:
            lo = mid
        else:
            hi = mid
    (t0, x0, y0), (t1, x1, y1) = trail[lo], trail[hi]
    u = (t - t0) / (t1 - t0)
    return (x0 + u * (x1 - x0), y0 + u * (y1 - y0))


# --- laser ----------------------------------------------------------------

def _lookup_tables(grid: OccupancyGrid) -> tuple:
    """Occupancy and clearance arrays padded by one occupied cell on every side."""
    tables = grid.__dict__.get("_ray_tables")
    if tables is None:
        occ = np.pad(grid.cells, 1, constant_values=True)
        # same clearance bound as OccupancyGrid.clearance_points
        clear = np.maximum(
            ndimage.distance_transform_edt(~occ) * grid.resolution - math.sqrt(2.0) * grid.resolution,
            0.0)
        tables = (occ, clear)
        grid.__dict__["_ray_tables"] = tables
    return tables


def _cells(grid: OccupancyGrid, pts: np.ndarray, shape) -> tuple:
    """Padded-table indices; anything off the map clips onto the occupied border."""
    c, s = math.cos(grid.origin.theta), math.sin(grid.origin.theta)
    dx = pts[..., 0] - grid.origin.x
    dy = pts[..., 1] - grid.origin.y
    i = np.floor((c * dx + s * dy) / grid.resolution).astype(np.int64) + 1
    j = np.floor((-s * dx + c * dy) / grid.resolution).astype(np.int64) + 1
    return np.clip(j, 0, shape[0] - 1), np.clip(i, 0, shape[1] - 1)


def grid_ranges(grid: OccupancyGrid, origin: tuple, angles: np.ndarray, max_range: float,
                max_skips: int = 20) -> np.ndarray:
    """Ray-march every beam at half-cell steps; misses report ``max_range``.

    A hit is placed mid-way between the last free sample and the first
    occupied one, so its error is at most a quarter cell along the beam.
    Samples that the grid's clearance bound proves free are skipped (for
    up to ``max_skips`` rounds, then the stragglers are marched plainly),
    which changes the cost but never the first occupied sample.
    """
    occ_t, clear_t = _lookup_tables(grid)
    step = grid.resolution / 2.0
    n = int(math.ceil(max_range / step))
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    o = np.asarray(origin, dtype=float)
    k = np.ones(len(angles), dtype=np.int64)
    first = np.zeros(len(angles), dtype=np.int64)   # 0: no hit
    live = np.arange(len(angles))
    for _ in range(max_skips):
        if not live.size:
            break
        pts = o + dirs[live] * (step * k[live])[:, None]
        j, i = _cells(grid, pts, occ_t.shape)
        occ = occ_t[j, i]
        first[live[occ]] = k[live[occ]]
        free = ~occ
        live = live[free]
        k[live] += np.maximum(1, np.floor(clear_t[j[free], i[free]] / step).astype(np.int64))
        live = live[k[live] <= n]
    if live.size:
        idx = k[live][:, None] + np.arange(n)[None, :]
        valid = idx <= n
        pts = o + dirs[live][:, None, :] * (step * idx)[:, :, None]
        j, i = _cells(grid, pts, occ_t.shape)
        occ = occ_t[j, i] & valid
        hit = occ.any(axis=1)
        first[live[hit]] = idx[hit, occ[hit].argmax(axis=1)]
    r = np.full(len(angles), float(max_range))
    hit = first > 0
    r[hit] = np.minimum(step * first[hit] - step / 2.0, max_range)
    return r


def grid_ranges_reference(grid: OccupancyGrid, origin: tuple, angles: np.ndarray,
                          max_range: float) -> np.ndarray:
    """Plain march over every half-cell sample; the slow twin of ``grid_ranges``."""
    step = grid.resolution / 2.0
    n = int(math.ceil(max_range / step))
    s = step * np.arange(1, n + 1)
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    pts = np.asarray(origin)[None, None, :] + dirs[:, None, :] * s[None, :, None]
    occ = grid.occupied_points(pts)
    hit = occ.any(axis=1)
    first = occ.argmax(axis=1)
    r = np.full(len(angles), float(max_range))
    r[hit] = np.minimum(s[first[hit]] - step / 2.0, max_range)
    return r


def ray_disc(origin, dirs: np.ndarray, center, radius: float) -> np.ndarray:
    """Nearest positive hit distance of unit rays with a disc (inf when missed)."""
    oc = np.asarray(origin, dtype=float) - np.asarray(center, dtype=float)
    b = dirs @ oc
    c = oc @ oc - radius * radius
    disc = b * b - c
    out = np.full(len(dirs), np.inf)
    ok = disc >= 0
    sq = np.sqrt(disc[ok])
    t0, t1 = -b[ok] - sq, -b[ok] + sq
    t = np.where(t0 > 0, t0, np.where(t1 > 0, t1, np.inf))
    out[ok] = t
    return out


def ray_ellipse(origin, dirs: np.ndarray, center, a: float, b: float, theta: float) -> np.ndarray:
    """Nearest positive hit with an ellipse (semi-axes a along ``theta``, b across)."""
    c, s = math.cos(theta), math.sin(theta)
    ox, oy = origin[0] - center[0], origin[1] - center[1]
    # into the ellipse frame, then scale to a unit circle
    lo = np.array([(c * ox + s * oy) / a, (-s * ox + c * oy) / b])
    ld = np.column_stack([(c * dirs[:, 0] + s * dirs[:, 1]) / a, (-s * dirs[:, 0] + c * dirs[:, 1]) / b])
    A = (ld ** 2).sum(axis=1)
    B = ld @ lo
    C = lo @ lo - 1.0
    disc = B * B - A * C
    out = np.full(len(dirs), np.inf)
    ok = disc >= 0
    sq = np.sqrt(disc[ok])
    t0, t1 = (-B[ok] - sq) / A[ok], (-B[ok] + sq) / A[ok]
    out[ok] = np.where(t0 > 0, t0, np.where(t1 > 0, t1, np.inf))
    return out


def pedestrian_ranges(pedestrians: Sequence[PedestrianAgent], origin, angles: np.ndarray,
                      channel: str) -> np.ndarray:
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    r = np.full(len(angles), np.inf)
    for ped in pedestrians:
        if channel == "ankle":
            for leg in ped.legs():
                r = np.minimum(r, ray_disc(origin, dirs, leg, ped.leg_radius))
        else:
            # major axis across the shoulders, perpendicular to the heading
            r = np.minimum(r, ray_ellipse(origin, dirs, ped.position, ped.torso_major,
                                          ped.torso_minor, ped.heading + math.pi / 2))
    return r


def cast_scan(grid: Optional[OccupancyGrid], pedestrians: Sequence[PedestrianAgent],
              sensor_pose: Pose2D, channel: str, fov: float, n_beams: int, max_range: float,
              noise_std: float = 0.0, rng: Optional[np.random.Generator] = None,
              stamp: float = 0.0) -> LaserScan:
    if n_beams < 2:
        raise ValueError("n_beams must be >= 2")
    inc = fov / (n_beams - 1)
    angle_min = -fov / 2.0
    angles = sensor_pose.theta + angle_min + inc * np.arange(n_beams)
    origin = (sensor_pose.x, sensor_pose.y)
    r = np.full(n_beams, float(max_range))
    if grid is not None:
        r = grid_ranges(grid, origin, angles, max_range)
    r = np.minimum(r, pedestrian_ranges(pedestrians, origin, angles, channel))
    hit = r < max_range
    if noise_std > 0 and hit.any():
        if rng is None:
            raise ValueError("noisy scans need a random generator")
        r[hit] = np.clip(r[hit] + rng.normal(0.0, noise_std, int(hit.sum())), 0.0, max_range)
    return LaserScan(sensor_pose, channel, angle_min, inc, r, max_range, stamp)


# --- QR anchors -----------------------------------------------------------

@dataclass(frozen=True)
class QrTag:
    """Tag pose in the map (face normal = tag +z axis) and its payload text."""

    pose: Transform3D
    payload: str


def line_of_sight(grid: Optional[OccupancyGrid], a, b) -> bool:
    if grid is None:
        return True
    d = math.hypot(b[0] - a[0], b[1] - a[1])
    n = max(2, int(math.ceil(d / (grid.resolution / 2.0))))
    u = np.linspace(0.0, 1.0, n)[1:-1]
    pts = np.column_stack([a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])])
    return not grid.occupied_points(pts).any()


def detect_qr(tags: Sequence[QrTag], grid: Optional[OccupancyGrid], robot: Pose2D,
              robot_T_cam: Transform3D, fov: float, max_range: float, noise_std: float = 0.0,
              rng: Optional[np.random.Generator] = None):
    """Return ``(cam_T_qr, payload)`` for the nearest visible tag, or None.

    A tag is visible when it lies within the camera's field of view and
    range, faces the camera, and has a clear line of sight on the grid.
    """
    map_T_cam = compose(Transform3D.from_pose2d(robot), robot_T_cam)
    cam_axis = quat_rotate(map_T_cam.rotation, (1.0, 0.0, 0.0))
    cam_pos = map_T_cam.translation
    best = None
    for tag in tags:
        rel = [tp - cp for tp, cp in zip(tag.pose.translation, cam_pos)]
        dist = math.sqrt(sum(v * v for v in rel))
        if dist > max_range or dist == 0.0:
            continue
        cosang = sum(r * c for r, c in zip(rel, cam_axis)) / dist
        if math.acos(max(-1.0, min(1.0, cosang))) > fov / 2.0:
            continue
        normal = quat_rotate(tag.pose.rotation, (0.0, 0.0, 1.0))
        if sum(n * c for n, c in zip(normal, cam_axis)) >= 0.0:
            continue
        tag_xy = tag.pose.translation[:2]
        # stop just short of the tag, which usually sits on a wall cell
        back = max(0.0, 1.0 - (grid.resolution if grid else 0.0) / max(dist, 1e-9))
        end = (cam_pos[0] + back * (tag_xy[0] - cam_pos[0]), cam_pos[1] + back * (tag_xy[1] - cam_pos[1]))
        if not line_of_sight(grid, (robot.x, robot.y), end):
            continue
        if best is None or dist < best[0]:
            best = (dist, tag)
    if best is None:
        return None
    tag = best[1]
    cam_T_qr = compose(invert(map_T_cam), tag.pose)
    if noise_std > 0:
        if rng is None:
            raise ValueError("noisy detections need a random generator")
        t = np.asarray(cam_T_qr.translation) + rng.normal(0.0, noise_std, 3)
        cam_T_qr = Transform3D(tuple(t), cam_T_qr.rotation)
    return cam_T_qr, tag.payload


# --- world and runs ---------------------------------------------------------

@dataclass
class SimParams:
    """Scenario-level knobs; every field can be set with ``param <name> <value>``."""

    time_cap: float = 120.0
    duration: Optional[float] = None
    perception: str = "laser"          # laser | oracle
    laser_fov: float = math.radians(270.0)
    laser_beams: int = 541
    laser_range: float = 8.0
    laser_noise: float = 0.005
    camera_fov: float = 1.2
    camera_range: float = 5.0
    qr_noise: float = 0.0
    robot_t_cam: Transform3D = Transform3D((0.2, 0.0, 1.0))
    localization_noise: float = 0.0


@dataclass
class WorldConfig:
    grid: OccupancyGrid
    speed_map: StaticSpeedMap
    semantic: SemanticMap
    robot_start: Pose2D
    qr_tags: tuple = ()
    pedestrians: tuple = ()
    dt: float = 0.1
    seed: int = 0
    name: str = "scenario"
    events: tuple = ()        # (time, BehaviorEvent)
    sim: SimParams = field(default_factory=SimParams)
    behavior: BehaviorParams = field(default_factory=BehaviorParams)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.grid.occupied_at((self.robot_start.x, self.robot_start.y)):
            raise ValueError("robot start pose is in an occupied cell")


BASE_COLUMNS = ("t", "x", "y", "theta", "v", "omega", "limit", "zone", "state",
                "guide_dist", "min_human_dist")


@dataclass
class RunSummary:
    scenario: str
    controller: str
    completion_time: float
    min_human_distance: float
    max_accel: float
    timeout: bool
    collisions: int = 0
    red_zone_max_speed: float = 0.0
    localization_error: float = math.nan

    FIELDS = ("scenario", "controller", "completion_time", "min_human_distance", "max_accel",
              "timeout", "collisions", "red_zone_max_speed", "localization_error")

    def line(self) -> str:
        parts = []
        for f in self.FIELDS:
            v = getattr(self, f)
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = f"{v:.6f}"
            parts.append(f"{f}={v}")
        return " ".join(parts)

    @classmethod
    def parse(cls, line: str) -> "RunSummary":
        kv = dict(p.split("=", 1) for p in line.split())
        return cls(kv["scenario"], kv["controller"], float(kv["completion_time"]),
                   float(kv["min_human_distance"]), float(kv["max_accel"]),
                   kv["timeout"] == "true", int(kv["collisions"]),
                   float(kv["red_zone_max_speed"]), float(kv["localization_error"]))


@dataclass
class MetricsLog:
    columns: tuple
    rows: list
    summary: RunSummary
    transitions: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        vals = [r[k] for r in self.rows]
        if name in ("zone", "state"):
            return np.array(vals, dtype=object)
        return np.array(vals, dtype=float)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(",".join(self.columns) + "\n")
        for r in self.rows:
            out.write(",".join(v if isinstance(v, str) else f"{v:.6f}" for v in r) + "\n")
        return out.getvalue()


def oracle_tracks(pedestrians, robot: Pose2D, grid, max_range: float, now: float,
                  memory: dict, timeout: float) -> list:
    """Ground-truth tracks for visible pedestrians; unseen ones coast until ``timeout``."""
    for k, ped in enumerate(pedestrians):
        if (math.hypot(ped.position[0] - robot.x, ped.position[1] - robot.y) <= max_range
                and line_of_sight(grid, (robot.x, robot.y), ped.position)):
            prev = memory.get(k)
            vel = (0.0, 0.0)
            if prev is not None and now > prev.last_seen:
                dt = now - prev.last_seen
                vel = ((ped.position[0] - prev.state[0]) / dt, (ped.position[1] - prev.state[1]) / dt)
            memory[k] = Track(k, np.r_[ped.position, vel], np.eye(4) * 1e-4, now, 99, True)
    for k in [k for k, t in memory.items() if now - t.last_seen > timeout]:
        del memory[k]
    return [memory[k] for k in sorted(memory)]


def _localize_from_qr(cfg: WorldConfig, robot: Pose2D, rng) -> Optional[tuple]:
    s = cfg.sim
    det = detect_qr(cfg.qr_tags, cfg.grid, robot, s.robot_t_cam, s.camera_fov, s.camera_range,
                    s.qr_noise, rng)
    if det is None:
        return None
    cam_T_qr, payload = det
    tag_pose = parse_payload(payload).tag_pose
    return qr_localize(tag_pose, cam_T_qr, s.robot_t_cam), payload


def run_scenario(cfg: WorldConfig, controller, oracle: Optional[bool] = None) -> MetricsLog:
    """Run one scenario with one controller; see ``MetricsLog`` for the output."""
    if isinstance(controller, str):
        controller = Controller.parse(controller)
    s = cfg.sim
    dt = cfg.dt
    rng = np.random.default_rng(cfg.seed)
    use_oracle = (s.perception == "oracle") if oracle is None else oracle
    bparams = replace(cfg.behavior, dt=dt)
    brain = GuideRobot(cfg.grid, cfg.speed_map, cfg.semantic, controller, bparams, cfg.robot_start)
    tracker = Tracker(replace(cfg.tracker))
    memory: dict = {}
    robot = UnicycleState(cfg.robot_start)
    peds = list(cfg.pedestrians)
    trail = [(0.0, robot.pose.x, robot.pose.y)]
    pending = sorted(cfg.events, key=lambda e: e[0])
    ev_idx = 0
    columns = BASE_COLUMNS + tuple(f"dist_{p.id}" for p in peds) + tuple(f"speed_{p.id}" for p in peds)
    rows = []
    ped_speed = [0.0] * len(peds)
    cap = s.duration if s.duration is not None else s.time_cap
    n_steps = int(round(cap / dt))
    completion = math.nan
    min_dist = math.inf
    max_accel = 0.0
    red_max = 0.0
    collisions = 0
    loc_err = math.nan
    prev_v = 0.0

    for k in range(n_steps + 1):
        t = round(k * dt, 9)
        pose = robot.pose
        # sensing
        if use_oracle:
            tracks = oracle_tracks(peds, pose, cfg.grid, s.laser_range, t, memory, tracker.config.timeout)
        else:
            ankle = cast_scan(cfg.grid, peds, pose, "ankle", s.laser_fov, s.laser_beams,
                              s.laser_range, s.laser_noise, rng, t)
            back = Pose2D(pose.x, pose.y, pose.theta + math.pi)
            torso = cast_scan(cfg.grid, peds, back, "torso", s.laser_fov, s.laser_beams,
                              s.laser_range, s.laser_noise, rng, t)
            tracker.step(t, [detect_legs(ankle, cfg.detector), detect_torsos(torso, cfg.detector)])
            tracks = list(tracker.tracks)

        events = []
        while ev_idx < len(pending) and pending[ev_idx][0] <= t + 1e-9:
            events.append(pending[ev_idx][1])
            ev_idx += 1
        if brain.state.value == "NON_LOCALIZED" and cfg.qr_tags:
            found = _localize_from_qr(cfg, pose, rng)
            if found is not None:
                qr_pose = found[0]
                loc_err = math.hypot(qr_pose.x - pose.x, qr_pose.y - pose.y)
                events.append(BehaviorEvent(EventKind.POSE_INITIALIZED, qr_pose))
        est = pose
        if s.localization_noise > 0:
            n = rng.normal(0.0, s.localization_noise, 3)
            est = Pose2D(pose.x + n[0], pose.y + n[1], pose.theta + n[2] / 10.0)
        out = brain.tick(t, est, tracks, events)

        v = out.command.v
        dists = [math.hypot(p.position[0] - pose.x, p.position[1] - pose.y) for p in peds]
        md = min(dists) if dists else math.inf
        min_dist = min(min_dist, md)
        max_accel = max(max_accel, abs(v - prev_v) / dt)
        prev_v = v
        limit = out.limit
        zone = out.zone
        if brain.pose is None:
            # not localized: report the map at the true pose for the log
            limit = cfg.speed_map.limit_at((pose.x, pose.y))
            zone = cfg.speed_map.zone_class_at((pose.x, pose.y))
        if cfg.speed_map.zone_class_at((pose.x, pose.y)) == "red":
            red_max = max(red_max, v)
        rows.append((t, pose.x, pose.y, pose.theta, v, out.command.omega, limit, zone,
                     out.state.value, out.guide_distance, md, *dists, *ped_speed))
        if out.task_complete:
            completion = t
            break
        if s.duration is None and k == n_steps:
            break

        robot = step_robot(robot, out.command, dt)
        if cfg.grid.occupied_at((robot.pose.x, robot.pose.y)):
            collisions += 1
        new_peds = [step_pedestrian(p, t, dt, (pose.x, pose.y), trail) for p in peds]
        ped_speed = [math.hypot(a.position[0] - b.position[0], a.position[1] - b.position[1]) / dt
                     for a, b in zip(new_peds, peds)]
        peds = new_peds
        trail.append((round(t + dt, 9), robot.pose.x, robot.pose.y))

    timeout = math.isnan(completion) and s.duration is None
    if s.duration is not None and math.isnan(completion):
        completion = rows[-1][0]
    summary = RunSummary(cfg.name, str(controller), completion, min_dist, max_accel, timeout,
                         collisions, red_max, loc_err)
    return MetricsLog(columns, rows, summary, brain.history)
