"""Regenerate the shipped scenario files under scenarios/.

The maps are hand-drawn replicas (rectangles of free space carved out of
solid wall), not surveys of any real building.  Run from the repo root:

    python3 scripts/build_scenarios.py
"""
from __future__ import annotations

import math
import pathlib

import numpy as np

from speedmaps.geometry import Transform3D, quat_from_axis_angle
from speedmaps.maps import OccupancyGrid
from speedmaps.geometry import Pose2D
from speedmaps.qr_payload import QrPayload, generate_payload

ROOT = pathlib.Path(__file__).resolve().parents[1]
OUT = ROOT / "scenarios"


def carve(width_m, height_m, res, rooms):
    """Solid grid with axis-aligned free rectangles ``(x0, y0, x1, y1)`` in metres."""
    w, h = int(round(width_m / res)), int(round(height_m / res))
    cells = np.ones((h, w), dtype=bool)
    for x0, y0, x1, y1 in rooms:
        i0, i1 = int(round(x0 / res)), int(round(x1 / res))
        j0, j1 = int(round(y0 / res)), int(round(y1 / res))
        cells[j0:j1, i0:i1] = False
    return OccupancyGrid(res, Pose2D(0.0, 0.0, 0.0), cells)


def grid_block(g: OccupancyGrid) -> str:
    return g.to_text()


def box(x0, y0, x1, y1):
    return f"{x0:g} {y0:g} {x1:g} {y0:g} {x1:g} {y1:g} {x0:g} {y1:g}"


def write(name, text):
    OUT.mkdir(exist_ok=True)
    (OUT / f"{name}.scn").write_text(text)
    print("wrote", OUT / f"{name}.scn")


def straight():
    g = carve(6.0, 3.0, 0.1, [(0.5, 0.5, 5.5, 2.5)])
    write("straight", f"""\
# 5 m straight corridor; goal 3 m ahead of the robot.
name straight
{grid_block(g)}
default 0.5
zone green 1.5 {box(0.5, 0.5, 5.5, 2.5)}
waypoint end 4.5 1.5 0
waypoint base 1.5 1.5 0
robot 1.5 1.5 0
param perception oracle
param time_cap 30
at 0 event PoseInitialized
at 0 event SendRequested end
""")


def corridor():
    # long horizontal corridor, blind left turn, long vertical corridor
    g = carve(30.0, 20.0, 0.1, [(0.5, 1.0, 25.0, 3.0), (23.0, 1.0, 25.0, 19.5)])
    write("corridor", f"""\
# Corridor with a blind left-hand corner and a bystander standing just
# around it, near the outer wall.  Replica topology, invented dimensions.
name corridor
{grid_block(g)}
default 0.5
zone green 1.5 {box(0.5, 1.0, 21.5, 3.0)}
zone green 1.5 {box(23.0, 4.5, 25.0, 19.5)}
zone yellow 0.5 {box(21.5, 1.0, 25.0, 4.5)}
zone red 0.15 {box(23.15, 2.25, 23.75, 2.85)}
waypoint goal 24.0 17.5 1.5708
waypoint base 1.5 2.0 0
robot 1.5 2.0 0
pedestrian bystander stand 24.5 3.6 heading=3.1416
param time_cap 90
at 0 event PoseInitialized
at 0 event SendRequested goal
""")


def guidance():
    g = carve(22.0, 4.0, 0.1, [(0.5, 0.5, 21.5, 3.5)])
    # tag on the south wall, 1 m up, facing north (+z -> +y)
    tag = Transform3D((2.5, 0.5, 1.0), quat_from_axis_angle((1.0, 0.0, 0.0), -math.pi / 2))
    payload = QrPayload("guidance_map.txt", "guidance_zones.txt", tag)
    (OUT / "guidance_tag.xml").write_text(generate_payload(payload))
    (OUT / "guidance_map.txt").write_text(g.to_text())
    zones = f"default 0.5\nzone green 1.5 {box(0.5, 0.5, 21.5, 3.5)}\n"
    (OUT / "guidance_zones.txt").write_text(zones)
    write("guidance", f"""\
# Guiding a person down a straight hall.  The robot bootstraps its pose
# from a QR tag on the south wall, turns to the visitor who walks up from
# the north-west, and guides them east to the exit door.  Replica setup,
# invented dimensions.
name guidance
{grid_block(g)}
{zones}landmark exit 21.5 1.5 0 21.5 2.5 0 21.5 2.5 2 21.5 1.5 2
waypoint base 2.5 1.6 -1.5708
robot 2.5 1.6 -1.5708
qr guidance_tag.xml
pedestrian visitor follow_robot 1.2 2.9 preferred_speed=1.0 reaction_delay=0.6 follow_gain=2.0
param time_cap 90
at 3.0 event GuideRequested exit
at 4.0 event Confirmed
""")


if __name__ == "__main__":
    straight()
    corridor()
    guidance()
