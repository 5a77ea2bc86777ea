"""Guide-robot executive: finite state machine plus the per-tick controller.

``fsm_step`` is a pure transition table.  ``GuideRobot`` owns the mutable
runtime state (current goal, path, focus person, previous speed, dynamic
speed layers) and turns it into a velocity command every control tick.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import PlanningError, SpeedMapsError
from .geometry import Pose2D, wrap_angle
from .maps import (OccupancyGrid, SpeedLayer, StaticSpeedMap, effective_limit,
                   effective_limit_near)
from .planning import (Path, SpeedProfile, VelocityCommand, closest_index, follow_path,
                       following_goal, governed_speed, guidance_speed, heading_command,
                       plan_path, raytrace_free_goal, rate_limit, stopping_speed)
from .semantic import SemanticMap, goal_for_label


class RobotState(enum.Enum):
    NON_LOCALIZED = "NON_LOCALIZED"
    WAITING = "WAITING"
    APPROACHING_USER = "APPROACHING_USER"
    CONFIRMING = "CONFIRMING"
    GUIDING = "GUIDING"
    FOLLOWING = "FOLLOWING"
    RETURNING_TO_BASE = "RETURNING_TO_BASE"
    NAVIGATING = "NAVIGATING"


class EventKind(enum.Enum):
    POSE_INITIALIZED = "PoseInitialized"
    PERSON_NEARBY = "PersonNearby"
    GUIDE_REQUESTED = "GuideRequested"
    SEND_REQUESTED = "SendRequested"
    CONFIRMED = "Confirmed"
    FOLLOW_REQUESTED = "FollowRequested"
    GOAL_REACHED = "GoalReached"
    PERSON_LOST = "PersonLost"
    CANCEL = "Cancel"
    DWELL_TIMEOUT = "DwellTimeout"


@dataclass(frozen=True)
class BehaviorEvent:
    kind: EventKind
    arg: object = None

    @classmethod
    def parse(cls, name: str, args: Sequence[str] = ()) -> "BehaviorEvent":
        try:
            kind = EventKind(name)
        except ValueError:
            raise SpeedMapsError(f"unknown event {name!r}") from None
        if not args:
            return cls(kind)
        arg: object = args[0]
        if kind in (EventKind.PERSON_NEARBY, EventKind.FOLLOW_REQUESTED):
            arg = int(args[0])
        elif kind is EventKind.POSE_INITIALIZED and len(args) == 3:
            arg = Pose2D(*(float(a) for a in args))
        return cls(kind, arg)


class ActionKind(enum.Enum):
    FACE_PERSON = "face_person"
    DISPLAY_DESTINATION = "display_destination"
    SET_GOAL = "set_goal"
    GUIDE_PERSON = "guide_person"
    FOLLOW_PERSON = "follow_person"
    ARM_DWELL = "arm_dwell"
    GO_TO_BASE = "go_to_base"
    CLEAR = "clear"


NAVIGATION_ACTIONS = frozenset({ActionKind.FACE_PERSON, ActionKind.SET_GOAL,
                                ActionKind.GUIDE_PERSON, ActionKind.FOLLOW_PERSON,
                                ActionKind.GO_TO_BASE})


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    arg: object = None


S, E, A = RobotState, EventKind, ActionKind

# (state, event) -> (next state, actions built from the event argument)
_TABLE = {
    (S.NON_LOCALIZED, E.POSE_INITIALIZED): (S.WAITING, lambda ev: []),
    (S.WAITING, E.PERSON_NEARBY):
        (S.APPROACHING_USER, lambda ev: [Action(A.FACE_PERSON, ev.arg)]),
    (S.APPROACHING_USER, E.GUIDE_REQUESTED):
        (S.CONFIRMING, lambda ev: [Action(A.DISPLAY_DESTINATION, ev.arg)]),
    (S.CONFIRMING, E.CONFIRMED):
        (S.GUIDING, lambda ev: [Action(A.SET_GOAL), Action(A.GUIDE_PERSON)]),
    (S.APPROACHING_USER, E.FOLLOW_REQUESTED):
        (S.FOLLOWING, lambda ev: [Action(A.FOLLOW_PERSON, ev.arg)]),
    (S.GUIDING, E.GOAL_REACHED): (S.WAITING, lambda ev: [Action(A.ARM_DWELL)]),
    (S.WAITING, E.DWELL_TIMEOUT): (S.RETURNING_TO_BASE, lambda ev: [Action(A.GO_TO_BASE)]),
    (S.RETURNING_TO_BASE, E.GOAL_REACHED): (S.WAITING, lambda ev: []),
    (S.GUIDING, E.PERSON_LOST): (S.WAITING, lambda ev: [Action(A.CLEAR)]),
    (S.FOLLOWING, E.PERSON_LOST): (S.WAITING, lambda ev: [Action(A.CLEAR)]),
    (S.WAITING, E.SEND_REQUESTED): (S.NAVIGATING, lambda ev: [Action(A.SET_GOAL, ev.arg)]),
    (S.APPROACHING_USER, E.SEND_REQUESTED):
        (S.NAVIGATING, lambda ev: [Action(A.SET_GOAL, ev.arg)]),
    (S.NAVIGATING, E.GOAL_REACHED): (S.WAITING, lambda ev: [Action(A.ARM_DWELL)]),
}


def fsm_step(state: RobotState, event: BehaviorEvent) -> tuple:
    """Total transition function: unlisted pairs leave the state unchanged with no actions."""
    if event.kind is E.CANCEL:
        return S.WAITING, [Action(A.CLEAR)]
    entry = _TABLE.get((state, event.kind))
    if entry is None:
        return state, []
    nxt, build = entry
    return nxt, build(event)


@dataclass(frozen=True)
class Controller:
    """Speed-control variant used by a run.

    ``fixed_max`` and ``guidance_fixed`` model stock navigation: a fixed
    speed cap, no speed maps and the baseline acceleration limit.
    """

    name: str
    v_fixed: Optional[float] = None

    KINDS = ("fixed_max", "speedmap", "guidance_profile", "guidance_fixed")

    def __post_init__(self):
        if self.name not in self.KINDS:
            raise SpeedMapsError(f"unknown controller {self.name!r}; choose from {self.KINDS}")

    @classmethod
    def parse(cls, spec: str) -> "Controller":
        spec = spec.strip()
        for sep in (":", "("):
            if sep in spec:
                name, arg = spec.split(sep, 1)
                try:
                    return cls(name.strip(), float(arg.rstrip(")")))
                except ValueError:
                    raise SpeedMapsError(f"bad controller argument in {spec!r}") from None
        return cls(spec)

    @property
    def uses_speed_maps(self) -> bool:
        return self.name in ("speedmap", "guidance_profile")

    def __str__(self):
        return self.name if self.v_fixed is None else f"{self.name}:{self.v_fixed:g}"


@dataclass
class BehaviorParams:
    dt: float = 0.1
    v_max: float = 1.5
    v_fixed: float = 1.0
    a_max: float = 1.0
    a_max_baseline: float = 2.5
    lookahead: float = 0.5
    k_heading: float = 2.0
    omega_max: float = 1.5
    goal_tol: float = 0.15
    inflation: float = 0.35
    follow_dist: float = 0.9
    follow_replan: float = 0.25
    nearby_dist: float = 2.0
    dwell: float = 10.0
    layer_radius: float = 1.0
    layer_limit: Optional[float] = None   # None: the static map's default (yellow) limit
    layer_ttl: float = 0.3
    brake_radius: float = 0.15
    turn_in_place: float = math.pi / 2
    profile: SpeedProfile = field(default_factory=SpeedProfile)


@dataclass
class TickOutput:
    command: VelocityCommand
    layer: SpeedLayer
    events: list
    state: RobotState
    limit: float
    zone: str
    guide_distance: float = math.nan
    task_complete: bool = False


class GuideRobot:
    def __init__(self, grid: OccupancyGrid, speed_map: StaticSpeedMap, semantic: SemanticMap,
                 controller: Controller = Controller("speedmap"),
                 params: BehaviorParams = BehaviorParams(), base: Optional[Pose2D] = None):
        self.grid = grid
        self.speed_map = speed_map
        self.semantic = semantic
        self.controller = controller
        self.params = params
        self.base = base
        self.state = RobotState.NON_LOCALIZED
        self.localized = False
        self.pose: Optional[Pose2D] = None
        self.goal: Optional[Pose2D] = None
        self.path: Optional[Path] = None
        self.focus: Optional[int] = None
        self.pending_label: Optional[str] = None
        self.dwell_deadline: Optional[float] = None
        self.layers: list = []
        self.prev_v = 0.0
        self.task_complete = False
        self.history: list = []   # (time, state, event, actions)
        self._sensed: Optional[Pose2D] = None
        self._cap_path: Optional[Path] = None
        self._cap_static = None

    # --- events -----------------------------------------------------------

    def handle(self, event: BehaviorEvent, now: float) -> list:
        prev = self.state
        nxt, actions = fsm_step(self.state, event)
        if prev is S.NON_LOCALIZED and event.kind is E.POSE_INITIALIZED:
            self.localized = True
            # an explicit pose wins; otherwise trust the pose sensed this tick
            self.pose = event.arg if isinstance(event.arg, Pose2D) else self._sensed
        self.state = nxt
        for a in actions:
            self._apply(a, now)
        if event.kind is E.GOAL_REACHED and prev in (S.GUIDING, S.NAVIGATING):
            self.task_complete = True
        self.history.append((now, prev.value, event.kind.value, [a.kind.value for a in actions]))
        return actions

    def _apply(self, a: Action, now: float):
        if a.kind is A.CLEAR:
            self.goal = self.path = None
            self.focus = None
            self.pending_label = None
            self.dwell_deadline = None
        elif a.kind is A.FACE_PERSON:
            self.focus = a.arg
        elif a.kind is A.DISPLAY_DESTINATION:
            self.pending_label = a.arg
        elif a.kind is A.SET_GOAL:
            label = a.arg if a.arg is not None else self.pending_label
            self._set_goal_label(label)
        elif a.kind is A.GUIDE_PERSON:
            pass  # focus already holds the approached person
        elif a.kind is A.FOLLOW_PERSON:
            if a.arg is not None:
                self.focus = a.arg
            self.goal = self.path = None
        elif a.kind is A.ARM_DWELL:
            self.dwell_deadline = now + self.params.dwell
            self.goal = self.path = None
        elif a.kind is A.GO_TO_BASE:
            self.dwell_deadline = None
            base = self.semantic.waypoint("base")
            self._set_goal_pose(base.pose if base is not None else self.base)

    def _set_goal_label(self, label: Optional[str]):
        if label is None or self.pose is None:
            self.handle(BehaviorEvent(E.CANCEL), 0.0)
            return
        goal = goal_for_label(self.semantic, self.grid, self.pose, label, self.params.inflation)
        self._set_goal_pose(goal)

    def _set_goal_pose(self, goal: Optional[Pose2D]):
        self.goal = goal
        self.path = None
        if goal is not None and self.pose is not None:
            self.path = self._plan((goal.x, goal.y))

    def _plan(self, goal) -> Optional[Path]:
        try:
            return plan_path(self.grid, self.params.inflation, (self.pose.x, self.pose.y), goal)
        except PlanningError:
            return None

    # --- per tick ---------------------------------------------------------

    def tick(self, now: float, pose: Optional[Pose2D], tracks: Sequence = (),
             events: Sequence[BehaviorEvent] = ()) -> TickOutput:
        p = self.params
        fired = []
        self._sensed = pose
        for ev in events:
            self.handle(ev, now)
            fired.append(ev)
        if self.localized and pose is not None:
            self.pose = pose
        confirmed = [t for t in tracks if getattr(t, "confirmed", True)]
        by_id = {t.id: t for t in tracks}

        for ev in self._auto_events(now, confirmed, by_id):
            self.handle(ev, now)
            fired.append(ev)

        layer = self._emit_layer(now, confirmed)
        a = p.a_max if self.controller.uses_speed_maps else p.a_max_baseline
        nominal, omega, guide_d = 0.0, 0.0, math.nan
        focus = by_id.get(self.focus) if self.focus is not None else None
        if focus is not None and self.pose is not None:
            guide_d = float(np.hypot(focus.position[0] - self.pose.x, focus.position[1] - self.pose.y))

        if not self.localized or self.pose is None:
            pass
        elif self.state is S.APPROACHING_USER and focus is not None:
            bearing = wrap_angle(math.atan2(focus.position[1] - self.pose.y,
                                            focus.position[0] - self.pose.x) - self.pose.theta)
            omega = heading_command(bearing, p.k_heading, p.omega_max)
        elif self.state in (S.GUIDING, S.NAVIGATING, S.RETURNING_TO_BASE, S.FOLLOWING):
            nominal, omega, reached = self._drive(now, focus, guide_d, a)
            if reached:
                ev = BehaviorEvent(E.GOAL_REACHED)
                self.handle(ev, now)
                fired.append(ev)
                nominal, omega = 0.0, 0.0

        v = self._govern(nominal, now, a, guide_d)
        self.prev_v = v
        pos = (self.pose.x, self.pose.y) if self.pose is not None else (math.nan, math.nan)
        if self.pose is not None:
            limit = effective_limit(self.speed_map, self.layers, pos, now)
            zone = self.speed_map.zone_class_at(pos)
        else:
            limit, zone = math.nan, "none"
        return TickOutput(VelocityCommand(v, omega), layer, fired, self.state, limit, zone,
                          guide_d, self.task_complete)

    def _auto_events(self, now, confirmed, by_id):
        p = self.params
        if not self.localized:
            return []
        if self.state is S.WAITING:
            if self.dwell_deadline is not None:
                if now >= self.dwell_deadline - 1e-9:
                    return [BehaviorEvent(E.DWELL_TIMEOUT)]
                return []
            near = [(float(np.hypot(t.position[0] - self.pose.x, t.position[1] - self.pose.y)), t.id)
                    for t in confirmed]
            near = [n for n in near if n[0] <= p.nearby_dist]
            if near:
                return [BehaviorEvent(E.PERSON_NEARBY, min(near)[1])]
        elif self.state in (S.GUIDING, S.FOLLOWING):
            if self.focus is None or self.focus not in by_id:
                return [BehaviorEvent(E.PERSON_LOST)]
        return []

    def _emit_layer(self, now, confirmed) -> SpeedLayer:
        p = self.params
        lim = p.layer_limit if p.layer_limit is not None else self.speed_map.default_limit
        discs = [((t.position[0], t.position[1]), p.layer_radius, lim)
                 for t in confirmed if t.id != self.focus]
        layer = SpeedLayer(tuple(discs), now + p.layer_ttl)
        if self.controller.uses_speed_maps:
            self.layers = [l for l in self.layers if l.active(now)]
            if discs:
                self.layers.append(layer)
        return layer

    def _drive(self, now, focus, guide_d, a) -> tuple:
        """Nominal speed and turn rate along the current path; third value: goal reached."""
        p = self.params
        if self.state is S.FOLLOWING:
            if focus is None:
                return 0.0, 0.0, False
            target = following_goal(self.pose, focus.position, p.follow_dist)
            try:
                target = raytrace_free_goal(self.grid, p.inflation, target, self.pose)
            except PlanningError:
                return 0.0, 0.0, False
            if self.goal is None or math.hypot(target[0] - self.goal.x, target[1] - self.goal.y) > p.follow_replan:
                self.goal = Pose2D(target[0], target[1], 0.0)
                self.path = self._plan(target)
            if self.pose.distance_to(target) <= p.goal_tol or self.path is None:
                bearing = wrap_angle(math.atan2(focus.position[1] - self.pose.y,
                                                focus.position[0] - self.pose.x) - self.pose.theta)
                return 0.0, heading_command(bearing, p.k_heading, p.omega_max), False
        if self.goal is None:
            return 0.0, 0.0, False
        if self.state is not S.FOLLOWING and self.pose.distance_to((self.goal.x, self.goal.y)) <= p.goal_tol:
            return 0.0, 0.0, True
        if self.path is None:
            self.path = self._plan((self.goal.x, self.goal.y))
            if self.path is None:
                return 0.0, 0.0, False
        bearing, remaining = follow_path(self.path, self.pose, p.lookahead)
        omega = heading_command(bearing, p.k_heading, p.omega_max)

        c = self.controller
        if c.uses_speed_maps:
            nominal = p.v_max
        else:
            nominal = c.v_fixed if c.v_fixed is not None else p.v_fixed
        if self.state is S.GUIDING and c.name == "guidance_profile":
            nominal = guidance_speed(guide_d, p.profile) if math.isfinite(guide_d) else 0.0
        elif self.state is S.GUIDING and c.name == "guidance_fixed":
            if not (math.isfinite(guide_d) and guide_d < p.profile.d_guide):
                nominal = 0.0
        if abs(bearing) > p.turn_in_place:
            nominal = 0.0
        nominal = min(nominal, stopping_speed(remaining, a / 2.0))
        if c.uses_speed_maps:
            nominal = min(nominal, self._braking_cap(now, a))
        return nominal, omega, False

    def _braking_cap(self, now, a) -> float:
        """Highest speed from which every limit ahead on the path can be met.

        Braking curves use half the acceleration bound so the governor can
        always follow them from one tick to the next.
        """
        p = self.params
        path = self.path
        if self._cap_path is not path:
            # static part depends only on the path: compute once per plan
            self._cap_path = path
            self._cap_static = np.array([self.speed_map.limit_near(w, p.brake_radius)
                                         for w in path.waypoints])
        pos = (self.pose.x, self.pose.y)
        i = closest_index(path, pos)
        arcs = path.arc_lengths
        offset = math.hypot(path.waypoints[i, 0] - pos[0], path.waypoints[i, 1] - pos[1])
        horizon = p.v_max ** 2 / a + p.brake_radius + 0.5
        s = arcs[i:] - arcs[i] + offset
        keep = s <= horizon
        s, pts = s[keep], path.waypoints[i:][keep]
        lim = self._cap_static[i:][keep].copy()
        for layer in self.layers:
            if not layer.active(now):
                continue
            for (cx, cy), r, dl in layer.discs:
                near = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy) <= r + p.brake_radius
                lim[near] = np.minimum(lim[near], dl)
        if not len(lim):
            return math.inf
        return float(np.min(np.sqrt(lim * lim + a * np.maximum(0.0, s - p.brake_radius))))

    def _govern(self, nominal, now, a, guide_d) -> float:
        p = self.params
        if self.pose is None:
            return rate_limit(0.0, self.prev_v, a, p.dt)
        pos = (self.pose.x, self.pose.y)
        if self.controller.uses_speed_maps:
            v = governed_speed(nominal, self.speed_map, self.layers, pos, now, self.prev_v, a, p.dt)
            # hard limits win over the deceleration bound
            v = min(v, effective_limit_near(self.speed_map, self.layers, pos, now, p.brake_radius))
            if self.state is S.GUIDING and self.controller.name == "guidance_profile":
                v = min(v, guidance_speed(guide_d, p.profile) if math.isfinite(guide_d) else 0.0)
        else:
            v = rate_limit(nominal, self.prev_v, a, p.dt)
        return min(v, p.v_max)
