"""XML payload carried by a localization tag.

Schema (element order is fixed on output)::

    <speedmap_anchor>
      <map href="..."/>
      <speedmap href="..."/>
      <semantic href="..."/>            (optional)
      <pose x="" y="" z="" qw="" qx="" qy="" qz=""/>
    </speedmap_anchor>

Pose numbers are written with 9 decimal places, trailing zeros dropped.  On input a quaternion
within 1e-3 of unit norm is renormalized; anything further off is rejected.
"""
from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Optional

from .errors import MalformedPayload
from .geometry import Transform3D

ROOT = "speedmap_anchor"
POSE_KEYS = ("x", "y", "z", "qw", "qx", "qy", "qz")


@dataclass(frozen=True)
class QrPayload:
    map_link: str
    speed_map_link: str
    tag_pose: Transform3D = Transform3D()
    semantic_link: Optional[str] = None

    def __post_init__(self):
        if not self.map_link or not self.speed_map_link:
            raise MalformedPayload("map and speed-map links must be nonempty")
        if self.semantic_link == "":
            raise MalformedPayload("semantic link, when present, must be nonempty")


def _href(root: ET.Element, tag: str, required: bool = True) -> Optional[str]:
    el = root.find(tag)
    if el is None:
        if required:
            raise MalformedPayload(f"missing <{tag}> element")
        return None
    href = el.get("href")
    if not href:
        raise MalformedPayload(f"<{tag}> needs a nonempty href attribute")
    return href


def parse_payload(text: str) -> QrPayload:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise MalformedPayload(f"not well-formed XML: {exc}") from exc
    if root.tag != ROOT:
        raise MalformedPayload(f"root element must be <{ROOT}>, got <{root.tag}>")
    map_link = _href(root, "map")
    speed_link = _href(root, "speedmap")
    semantic = _href(root, "semantic", required=False)
    pose = root.find("pose")
    if pose is None:
        raise MalformedPayload("missing <pose> element")
    vals = []
    for key in POSE_KEYS:
        raw = pose.get(key)
        if raw is None:
            raise MalformedPayload(f"<pose> is missing attribute {key!r}")
        try:
            v = float(raw)
        except ValueError as exc:
            raise MalformedPayload(f"<pose> attribute {key}={raw!r} is not numeric") from exc
        if not math.isfinite(v):
            raise MalformedPayload(f"<pose> attribute {key} is not finite")
        vals.append(v)
    qn = math.sqrt(sum(v * v for v in vals[3:]))
    if abs(qn - 1.0) > 1e-3:
        raise MalformedPayload(f"quaternion norm {qn:.6f} is not within 1e-3 of 1")
    return QrPayload(map_link, speed_link, Transform3D(vals[:3], vals[3:]), semantic)


def _num(v: float) -> str:
    s = f"{v:.9f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def generate_payload(p: QrPayload) -> str:
    t, q = p.tag_pose.translation, p.tag_pose.rotation
    root = ET.Element(ROOT)
    ET.SubElement(root, "map", href=p.map_link)
    ET.SubElement(root, "speedmap", href=p.speed_map_link)
    if p.semantic_link is not None:
        ET.SubElement(root, "semantic", href=p.semantic_link)
    attrs = dict(zip(POSE_KEYS, (_num(v) for v in (*t, *q))))
    ET.SubElement(root, "pose", attrs)
    ET.indent(root, space="  ")
    return ET.tostring(root, encoding="unicode") + "\n"
