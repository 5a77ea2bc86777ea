"""Speed-map driven guide robot: maps, perception, planning, behavior and a 2D simulator."""
from .behavior import BehaviorParams, Controller, GuideRobot, RobotState, fsm_step
from .errors import SpeedMapsError
from .geometry import Pose2D, Transform3D, compose, invert, qr_localize
from .maps import OccupancyGrid, SpeedLayer, SpeedZone, StaticSpeedMap, effective_limit
from .planning import SpeedProfile, guidance_speed, plan_path
from .qr_payload import QrPayload, generate_payload, parse_payload
from .scenario import load_scenario, parse_scenario
from .semantic import SemanticMap, goal_for_label
from .simulator import MetricsLog, WorldConfig, run_scenario

__all__ = [
    "BehaviorParams", "Controller", "GuideRobot", "RobotState", "fsm_step", "SpeedMapsError",
    "Pose2D", "Transform3D", "compose", "invert", "qr_localize", "OccupancyGrid", "SpeedLayer",
    "SpeedZone", "StaticSpeedMap", "effective_limit", "SpeedProfile", "guidance_speed",
    "plan_path", "QrPayload", "generate_payload", "parse_payload", "load_scenario",
    "parse_scenario", "SemanticMap", "goal_for_label", "MetricsLog", "WorldConfig", "run_scenario",
]
