"""Scan-to-detection pipeline for the leg and torso channels."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateFit
from .legs import LegClassifier, classify_leg, fit_circle, leg_features, pair_legs
from .scan import LaserScan, segment_scan
from .torso import TorsoBands, classify_torso, fit_ellipse
from .tracking import Detection


@dataclass
class DetectorConfig:
    gap: float = 0.1
    leg_max_width: float = 0.4
    leg_pair_sep: float = 0.5
    leg_max_radius: float = 0.2
    min_torso_points: int = 6
    torso_max_width: float = 0.6
    legs: LegClassifier = field(default_factory=LegClassifier)
    torso: TorsoBands = field(default_factory=TorsoBands)


def detect_legs(scan: LaserScan, cfg: DetectorConfig = DetectorConfig()) -> list:
    """Leg-pair detections from an ankle-channel scan."""
    legs = []
    for seg in segment_scan(scan, cfg.gap):
        if len(seg) < 3:
            continue
        if np.hypot(*(seg.points[-1] - seg.points[0])) > cfg.leg_max_width:
            continue
        f = leg_features(seg)
        ok, _ = classify_leg(f, cfg.legs)
        if ok:
            # the arc's points sit on the near side; prefer the fitted center
            if f.radius < cfg.leg_max_radius:
                legs.append(fit_circle(seg.points)[0])
            else:
                legs.append(seg.points.mean(axis=0))
    return pair_legs(legs, cfg.leg_pair_sep, scan.stamp)


def detect_torsos(scan: LaserScan, cfg: DetectorConfig = DetectorConfig()) -> list:
    out = []
    for seg in segment_scan(scan, cfg.gap):
        if len(seg) < cfg.min_torso_points:
            continue
        if np.hypot(*(seg.points[-1] - seg.points[0])) > cfg.torso_max_width:
            continue
        try:
            e = fit_ellipse(seg.points)
        except DegenerateFit:
            continue
        if classify_torso(e, cfg.torso):
            out.append(Detection(np.array(e.center), "torso", scan.stamp))
    return out
