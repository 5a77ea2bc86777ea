"""Line-oriented scenario documents.

One file bundles everything a run needs::

    name corridor
    grid 40 20 0.1 0 0 0        # followed by exactly 20 rows of '#'/'.'
    zone red 0.15 x1 y1 x2 y2 ...
    default 0.5
    landmark desk x1 y1 z1 ...
    waypoint base x y theta
    robot x y theta
    pedestrian bob stand 3.0 1.0 [heading=...] [leg_radius=...]
    pedestrian amy scripted 0 1 1 5 4 1    # t x y triples
    pedestrian kim follow_robot 0.5 1.0 [preferred_speed=1.0 reaction_delay=0.5]
    qr tags/entry.xml [x y z qw qx qy qz]
    param time_cap 60
    at 2.0 event GuideRequested desk

Sections may appear in any order; ``#`` starts a comment everywhere
except inside the grid rows.  ``qr`` paths
are relative to the scenario file, and the tag sits at the pose its
payload declares unless an explicit true pose follows the path.
"""
from __future__ import annotations

import dataclasses
import pathlib
from typing import Optional

from .behavior import BehaviorEvent, BehaviorParams
from .errors import MalformedScenario, SpeedMapsError
from .geometry import Pose2D, Transform3D
from .maps import grid_from_rows, zones_from_config
from .perception import DetectorConfig, TrackerConfig
from .planning import SpeedProfile
from .qr_payload import parse_payload
from .semantic import SemanticMap, parse_semantic_line, PlanarLandmark
from .simulator import PedestrianAgent, QrTag, SimParams, WorldConfig


def _floats(parts, what):
    try:
        return [float(v) for v in parts]
    except ValueError as exc:
        raise MalformedScenario(f"non-numeric value in {what}") from exc


def _coerce(value: str, current):
    if isinstance(current, bool):
        if value.lower() in ("1", "true", "yes"):
            return True
        if value.lower() in ("0", "false", "no"):
            return False
        raise ValueError(value)
    if isinstance(current, int):
        return int(value)
    if isinstance(current, str):
        return value
    if isinstance(current, Transform3D):
        v = [float(x) for x in value.split()]
        return Transform3D(tuple(v[:3]), tuple(v[3:]) if len(v) == 7 else (1.0, 0.0, 0.0, 0.0))
    if value.lower() == "none":
        return None
    return float(value)


def _pedestrian(parts) -> PedestrianAgent:
    if len(parts) < 3:
        raise MalformedScenario("pedestrian line needs: id behavior ...")
    pid, behavior = parts[1], parts[2]
    pos_args = [p for p in parts[3:] if "=" not in p]
    kw = {}
    for p in parts[3:]:
        if "=" in p:
            k, v = p.split("=", 1)
            kw[k] = v
    fields = {f.name: f for f in dataclasses.fields(PedestrianAgent)}
    opts = {}
    for k, v in kw.items():
        if k not in fields or k in ("id", "behavior", "position", "waypoints"):
            raise MalformedScenario(f"unknown pedestrian option {k!r}")
        opts[k] = _floats([v], f"pedestrian {pid}")[0]
    nums = _floats(pos_args, f"pedestrian {pid}")
    try:
        if behavior == "scripted":
            if len(nums) < 3 or len(nums) % 3:
                raise MalformedScenario("scripted pedestrian needs t x y triples")
            wps = tuple(tuple(nums[i:i + 3]) for i in range(0, len(nums), 3))
            return PedestrianAgent(pid, "scripted", waypoints=wps, **opts)
        if len(nums) != 2:
            raise MalformedScenario(f"{behavior} pedestrian needs: x y")
        return PedestrianAgent(pid, behavior, position=tuple(nums), **opts)
    except MalformedScenario:
        raise
    except ValueError as exc:
        raise MalformedScenario(f"pedestrian {pid}: {exc}") from exc


def _set_param(targets: dict, key: str, value: str):
    """``key`` is a field of world/sim/behavior, or ``profile.x``, ``tracker.x``, ``detector.x``, ``legs.x``."""
    if "." in key:
        scope, name = key.split(".", 1)
        if scope not in ("profile", "tracker", "detector", "legs"):
            raise MalformedScenario(f"unknown parameter scope {scope!r}")
        order = [scope]
    else:
        name = key
        order = ["world", "sim", "behavior"]
    for scope in order:
        obj = targets[scope]
        if name in obj:
            try:
                obj[name] = _coerce(value, obj[name])
            except (ValueError, IndexError) as exc:
                raise MalformedScenario(f"bad value for param {key}: {value!r}") from exc
            return
    raise MalformedScenario(f"unknown param {key!r}")


def parse_scenario(text: str, base_dir: Optional[pathlib.Path] = None) -> WorldConfig:
    base_dir = pathlib.Path(base_dir) if base_dir is not None else pathlib.Path(".")
    raw_lines = text.splitlines()
    lines = [raw.split("#", 1)[0].rstrip() for raw in raw_lines]
    name = "scenario"
    grid = None
    zone_lines, landmarks, waypoints = [], [], []
    robot = None
    peds, tags, events = [], [], []
    params = []
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line:
            continue
        parts = line.split()
        kw = parts[0]
        if kw == "name":
            name = parts[1] if len(parts) > 1 else name
        elif kw == "grid":
            if grid is not None:
                raise MalformedScenario("more than one grid block")
            try:
                h = int(parts[2])
            except (IndexError, ValueError) as exc:
                raise MalformedScenario(f"bad grid header {line!r}") from exc
            # grid rows use '#' for walls, so they bypass comment stripping
            rows = [r.strip() for r in raw_lines[i:i + h]]
            i += h
            try:
                grid = grid_from_rows(line, rows)
            except ValueError as exc:
                raise MalformedScenario(str(exc)) from exc
        elif kw in ("zone", "default"):
            zone_lines.append(line)
        elif kw in ("landmark", "waypoint"):
            item = parse_semantic_line(parts)
            (landmarks if isinstance(item, PlanarLandmark) else waypoints).append(item)
        elif kw == "robot":
            if len(parts) != 4:
                raise MalformedScenario("robot line needs: x y theta")
            robot = Pose2D(*_floats(parts[1:], "robot"))
        elif kw == "pedestrian":
            peds.append(_pedestrian(parts))
        elif kw == "qr":
            if len(parts) not in (2, 9):
                raise MalformedScenario("qr line needs: payload-path [x y z qw qx qy qz]")
            path = base_dir / parts[1]
            try:
                payload = path.read_text()
            except OSError as exc:
                raise MalformedScenario(f"cannot read QR payload {path}: {exc}") from exc
            pose = parse_payload(payload).tag_pose
            if len(parts) == 9:
                v = _floats(parts[2:], "qr pose")
                pose = Transform3D(tuple(v[:3]), tuple(v[3:]))
            tags.append(QrTag(pose, payload))
        elif kw == "param":
            if len(parts) < 3:
                raise MalformedScenario("param line needs: key value")
            params.append((parts[1], " ".join(parts[2:])))
        elif kw == "at":
            if len(parts) < 4 or parts[2] != "event":
                raise MalformedScenario("timed event needs: at <t> event <Name> [args]")
            t = _floats(parts[1:2], "event time")[0]
            try:
                events.append((t, BehaviorEvent.parse(parts[3], parts[4:])))
            except (SpeedMapsError, ValueError) as exc:
                raise MalformedScenario(str(exc)) from exc
        else:
            raise MalformedScenario(f"unknown keyword {kw!r}")

    if grid is None:
        raise MalformedScenario("scenario has no grid block")
    if robot is None:
        raise MalformedScenario("scenario has no robot line")
    ids = [p.id for p in peds]
    if len(set(ids)) != len(ids):
        raise MalformedScenario("duplicate pedestrian id")
    try:
        speed_map = zones_from_config("\n".join(zone_lines))
        semantic = SemanticMap(tuple(landmarks), tuple(waypoints))
    except ValueError as exc:
        raise MalformedScenario(str(exc)) from exc

    det = DetectorConfig()
    targets = {
        "world": {"dt": 0.1, "seed": 0},
        "sim": dataclasses.asdict(SimParams()),
        "behavior": {f.name: getattr(BehaviorParams(), f.name)
                     for f in dataclasses.fields(BehaviorParams) if f.name not in ("profile", "dt")},
        "profile": dataclasses.asdict(SpeedProfile()),
        "tracker": dataclasses.asdict(TrackerConfig()),
        "detector": {f.name: getattr(det, f.name) for f in dataclasses.fields(DetectorConfig)
                     if f.name not in ("legs", "torso")},
        "legs": dataclasses.asdict(det.legs),
    }
    targets["sim"]["robot_t_cam"] = SimParams().robot_t_cam
    for key, value in params:
        _set_param(targets, key, value)
    try:
        profile = SpeedProfile(**targets["profile"])
        behavior = BehaviorParams(profile=profile, dt=targets["world"]["dt"], **targets["behavior"])
        legs = dataclasses.replace(det.legs, **targets["legs"])
        detector = DetectorConfig(legs=legs, torso=det.torso, **targets["detector"])
        sim = SimParams(**targets["sim"])
        if sim.perception not in ("laser", "oracle"):
            raise MalformedScenario(f"perception must be laser or oracle, got {sim.perception!r}")
        return WorldConfig(grid, speed_map, semantic, robot, tuple(tags), tuple(peds),
                           dt=targets["world"]["dt"], seed=int(targets["world"]["seed"]), name=name,
                           events=tuple(events), sim=sim, behavior=behavior, detector=detector,
                           tracker=TrackerConfig(**targets["tracker"]))
    except MalformedScenario:
        raise
    except ValueError as exc:
        raise MalformedScenario(str(exc)) from exc


def load_scenario(path) -> WorldConfig:
    path = pathlib.Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MalformedScenario(f"cannot read scenario {path}: {exc}") from exc
    return parse_scenario(text, path.parent)
