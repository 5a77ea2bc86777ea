"""Leg detection from ankle-height scan segments.

Each segment is described by three geometric features (width, circularity,
inscribed angle statistics) and scored by a weighted L1 distance to a leg
prototype.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import TooFewPoints
from .scan import Segment
from .tracking import Detection


@dataclass(frozen=True)
class LegFeatures:
    width: float
    circularity: float
    iav: float          # mean inscribed angle, radians
    iav_std: float = 0.0
    radius: float = math.inf


@dataclass(frozen=True)
class LegClassifier:
    """Prototype, weights and threshold for ``classify_leg``.

    Defaults were calibrated against the simulator's leg model
    (``scripts/calibrate_detectors.py``); they are tuning parameters, not
    measured human data.
    """

    width: float = 0.10
    circularity: float = 0.03
    iav: float = 2.2
    w_width: float = 8.0
    w_circularity: float = 4.0
    w_iav: float = 1.0
    threshold: float = 0.9

    def __post_init__(self):
        vals = (self.width, self.circularity, self.iav, self.w_width, self.w_circularity,
                self.w_iav, self.threshold)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("classifier parameters must be finite")
        if min(self.w_width, self.w_circularity, self.w_iav) < 0:
            raise ValueError("classifier weights must be non-negative")


def fit_circle(points: np.ndarray) -> tuple:
    """Algebraic least-squares circle; returns (center, radius), radius inf when collinear."""
    pts = np.asarray(points, dtype=float)
    mean = pts.mean(axis=0)
    p = pts - mean
    scale = np.sqrt((p ** 2).sum(axis=1).mean())
    if scale == 0.0:
        return mean, 0.0
    p = p / scale
    sv = np.linalg.svd(p, compute_uv=False)
    if sv[-1] <= 1e-9 * sv[0]:
        return mean, math.inf
    # x^2 + y^2 + D x + E y + F = 0
    A = np.column_stack([p, np.ones(len(p))])
    b = -(p ** 2).sum(axis=1)
    (D, E, F), *_ = np.linalg.lstsq(A, b, rcond=None)
    c = np.array([-D / 2.0, -E / 2.0])
    r2 = c @ c - F
    if r2 <= 0:
        return mean, math.inf
    return mean + c * scale, math.sqrt(r2) * scale


def inscribed_angles(points: np.ndarray) -> np.ndarray:
    """Angle at each interior point subtended by the two segment endpoints."""
    a, b = points[0], points[-1]
    mid = points[1:-1]
    u, v = a - mid, b - mid
    cos = (u * v).sum(axis=1) / (np.hypot(*u.T) * np.hypot(*v.T))
    return np.arccos(np.clip(cos, -1.0, 1.0))


def leg_features(s: Segment) -> LegFeatures:
    pts = np.asarray(s.points, dtype=float)
    if len(pts) < 3:
        raise TooFewPoints(f"leg features need 3+ points, got {len(pts)}")
    width = float(np.hypot(*(pts[-1] - pts[0])))
    center, radius = fit_circle(pts)
    if math.isinf(radius) or radius == 0.0:
        circ = 0.0
    else:
        resid = np.abs(np.hypot(*(pts - center).T) - radius)
        circ = float(resid.mean() / radius)
    ang = inscribed_angles(pts)
    return LegFeatures(width, circ, float(ang.mean()), float(ang.std()), float(radius))


def leg_score(f: LegFeatures, params: LegClassifier) -> float:
    return (params.w_width * abs(f.width - params.width)
            + params.w_circularity * abs(f.circularity - params.circularity)
            + params.w_iav * abs(f.iav - params.iav))


def classify_leg(f: LegFeatures, params: LegClassifier = LegClassifier()) -> tuple:
    """Return ``(is_leg, score)``; detection requires score strictly below threshold."""
    score = leg_score(f, params)
    return score < params.threshold, score


def pair_legs(leg_positions: Sequence, max_sep: float, stamp: float = 0.0) -> list:
    """Greedily pair mutually-nearest legs closer than ``max_sep``.

    Pairs yield a detection at their midpoint; unpaired legs yield one at the
    leg itself.  Output follows the input order of each detection's first leg.
    """
    if not max_sep > 0:
        raise ValueError("max_sep must be positive")
    legs = [np.asarray(p, dtype=float) for p in leg_positions]
    n = len(legs)
    cand = []
    for i in range(n):
        for j in range(i + 1, n):
            d = float(np.hypot(*(legs[i] - legs[j])))
            if d < max_sep:
                cand.append((d, i, j))
    cand.sort()
    used = set()
    out = {}
    for _, i, j in cand:
        if i in used or j in used:
            continue
        used.update((i, j))
        out[i] = (legs[i] + legs[j]) / 2.0
    for i in range(n):
        if i not in used:
            out[i] = legs[i]
    return [Detection(out[k], "leg_pair", stamp) for k in sorted(out)]
