"""Constant-velocity Kalman tracking with greedy nearest-neighbour association."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np


@dataclass(frozen=True, eq=False)
class Detection:
    position: np.ndarray
    source: str = "leg_pair"   # leg_pair | torso
    stamp: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(2))


@dataclass(frozen=True, eq=False)
class Track:
    id: int
    state: np.ndarray        # x, y, vx, vy
    covariance: np.ndarray   # 4x4
    last_seen: float
    hits: int = 1
    confirmed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "state", np.asarray(self.state, dtype=float).reshape(4))
        object.__setattr__(self, "covariance", np.asarray(self.covariance, dtype=float).reshape(4, 4))

    @property
    def position(self) -> np.ndarray:
        return self.state[:2]

    @property
    def velocity(self) -> np.ndarray:
        return self.state[2:]


def cv_transition(dt: float) -> np.ndarray:
    F = np.eye(4)
    F[0, 2] = F[1, 3] = dt
    return F


def cv_process_noise(dt: float, q: float) -> np.ndarray:
    """Continuous white-acceleration noise of intensity ``q`` integrated over ``dt``."""
    Q = np.zeros((4, 4))
    for i in (0, 1):
        Q[i, i] = dt ** 3 / 3.0
        Q[i, i + 2] = Q[i + 2, i] = dt ** 2 / 2.0
        Q[i + 2, i + 2] = dt
    return q * Q


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def kf_predict(t: Track, dt: float, q: float = 0.5) -> Track:
    if not dt > 0:
        raise ValueError("dt must be positive")
    F = cv_transition(dt)
    P = _symmetrize(F @ t.covariance @ F.T + cv_process_noise(dt, q))
    return replace(t, state=F @ t.state, covariance=P)


_H = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])


def kf_update(t: Track, d: Detection, r: float = 0.05) -> Track:
    """Position measurement update (Joseph form), ``r`` is the measurement std."""
    if not r > 0:
        raise ValueError("r must be positive")
    P = t.covariance
    R = (r * r) * np.eye(2)
    S = _H @ P @ _H.T + R
    K = np.linalg.solve(S, _H @ P).T
    x = t.state + K @ (d.position - _H @ t.state)
    IKH = np.eye(4) - K @ _H
    P = _symmetrize(IKH @ P @ IKH.T + K @ R @ K.T)
    return replace(t, state=x, covariance=P, last_seen=max(t.last_seen, d.stamp))


@dataclass
class Association:
    pairs: list            # (track index, detection index)
    unmatched_detections: list
    unmatched_tracks: list


def associate(tracks: Sequence[Track], detections: Sequence[Detection], gate: float) -> Association:
    """Greedy global nearest neighbour: repeatedly take the closest gated pair."""
    if not gate > 0:
        raise ValueError("gate must be positive")
    cand = []
    for i, t in enumerate(tracks):
        for j, d in enumerate(detections):
            dist = float(np.hypot(*(t.position - d.position)))
            if dist < gate:
                cand.append((dist, i, j))
    cand.sort()
    used_t, used_d, pairs = set(), set(), []
    for _, i, j in cand:
        if i in used_t or j in used_d:
            continue
        used_t.add(i)
        used_d.add(j)
        pairs.append((i, j))
    return Association(
        pairs,
        [j for j in range(len(detections)) if j not in used_d],
        [i for i in range(len(tracks)) if i not in used_t],
    )


def prune_tracks(tracks: Sequence[Track], now: float, timeout: float = 2.0) -> list:
    if not timeout > 0:
        raise ValueError("timeout must be positive")
    return [t for t in tracks if now - t.last_seen <= timeout]


@dataclass
class TrackerConfig:
    gate: float = 1.0
    r: float = 0.05
    q: float = 0.5
    timeout: float = 2.0
    confirm_hits: int = 3
    init_velocity_std: float = 10.0


@dataclass
class Tracker:
    """Owns the track list; call ``step`` once per control tick."""

    config: TrackerConfig = field(default_factory=TrackerConfig)
    tracks: list = field(default_factory=list)
    now: float = 0.0
    next_id: int = 0

    def spawn(self, d: Detection) -> Track:
        c = self.config
        P = np.diag([c.r ** 2, c.r ** 2, c.init_velocity_std ** 2, c.init_velocity_std ** 2])
        t = Track(self.next_id, np.r_[d.position, 0.0, 0.0], P, d.stamp, 1, c.confirm_hits <= 1)
        self.next_id += 1
        return t

    def predict_to(self, now: float):
        dt = now - self.now
        if dt > 0:
            self.tracks = [kf_predict(t, dt, self.config.q) for t in self.tracks]
        self.now = max(self.now, now)

    def update(self, detections: Sequence[Detection]):
        """One association round; detections should come from one source."""
        c = self.config
        asn = associate(self.tracks, detections, c.gate)
        tracks = list(self.tracks)
        for i, j in asn.pairs:
            t = kf_update(tracks[i], detections[j], c.r)
            hits = t.hits + 1
            tracks[i] = replace(t, hits=hits, confirmed=t.confirmed or hits >= c.confirm_hits)
        for j in asn.unmatched_detections:
            tracks.append(self.spawn(detections[j]))
        self.tracks = tracks
        return asn

    def step(self, now: float, detections_by_source: Sequence[Sequence[Detection]]) -> list:
        self.predict_to(now)
        seen = set()
        for dets in detections_by_source:
            asn = self.update(dets)
            seen.update(self.tracks[i].id for i, _ in asn.pairs)
        seen.update(t.id for t in self.tracks if t.last_seen == now)
        # a confirmed run must be consecutive: unseen tentative tracks restart
        self.tracks = [t if t.id in seen or t.confirmed else replace(t, hits=0)
                       for t in self.tracks]
        self.tracks = prune_tracks(self.tracks, now, self.config.timeout)
        return self.confirmed()

    def confirmed(self) -> list:
        return [t for t in self.tracks if t.confirmed]
