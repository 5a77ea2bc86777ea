"""Torso detection: direct least-squares ellipse fit of torso-height segments."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..errors import DegenerateFit


@dataclass(frozen=True)
class EllipseFit:
    center: tuple
    semi_major: float
    semi_minor: float
    orientation: float  # angle of the major axis, in (-pi/2, pi/2]

    def __post_init__(self):
        if not self.semi_major >= self.semi_minor > 0:
            raise ValueError("need semi_major >= semi_minor > 0")


@dataclass(frozen=True)
class TorsoBands:
    major: tuple = (0.08, 0.25)
    minor: tuple = (0.03, 0.18)


def fit_conic(points: np.ndarray) -> np.ndarray:
    """Ellipse-constrained algebraic conic fit (4ac - b^2 = 1).

    Solved as a generalized eigensystem, in the block-reduced form that keeps
    the scatter matrix well conditioned.  Returns (a, b, c, d, e, f) for
    a x^2 + b xy + c y^2 + d x + e y + f = 0 in the input coordinates.
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) < 6:
        raise DegenerateFit(f"ellipse fit needs 6+ points, got {len(pts)}")
    mean = pts.mean(axis=0)
    p = pts - mean
    scale = np.sqrt((p ** 2).sum(axis=1).mean())
    if scale == 0.0:
        raise DegenerateFit("all points coincide")
    p = p / scale
    sv = np.linalg.svd(p, compute_uv=False)
    if sv[-1] <= 1e-6 * sv[0]:
        raise DegenerateFit("points are collinear")
    x, y = p[:, 0], p[:, 1]
    D1 = np.column_stack([x * x, x * y, y * y])
    D2 = np.column_stack([x, y, np.ones_like(x)])
    S1, S2, S3 = D1.T @ D1, D1.T @ D2, D2.T @ D2
    try:
        T = -linalg.solve(S3, S2.T, assume_a="pos")
    except (linalg.LinAlgError, ValueError) as exc:
        raise DegenerateFit("singular linear scatter block") from exc
    M = S1 + S2 @ T
    C1 = np.array([[0.0, 0.0, 2.0], [0.0, -1.0, 0.0], [2.0, 0.0, 0.0]])
    w, V = linalg.eig(M, C1)
    V = np.real(V)
    cond = 4.0 * V[0] * V[2] - V[1] ** 2
    ok = np.nonzero((cond > 0) & np.isfinite(np.real(w)))[0]
    if len(ok) == 0:
        raise DegenerateFit("no elliptical solution")
    a1 = V[:, ok[np.argmin(np.abs(np.real(w[ok])))]]
    a2 = T @ a1
    A, B, C = a1
    Dn, En, Fn = a2
    # undo the normalisation x = (X - mx) / s
    mx, my = mean
    s = scale
    A_, B_, C_ = A / s ** 2, B / s ** 2, C / s ** 2
    D_ = Dn / s - 2 * A_ * mx - B_ * my
    E_ = En / s - 2 * C_ * my - B_ * mx
    F_ = Fn + A_ * mx * mx + B_ * mx * my + C_ * my * my - Dn * mx / s - En * my / s
    return np.array([A_, B_, C_, D_, E_, F_])


def conic_to_ellipse(coef: np.ndarray) -> EllipseFit:
    coef = np.asarray(coef, dtype=float)
    if coef[0] + coef[2] < 0:
        coef = -coef
    A, B, C, D, E, F = coef
    M = np.array([[A, B / 2.0], [B / 2.0, C]])
    det = np.linalg.det(M)
    if det <= 0:
        raise DegenerateFit("conic is not an ellipse")
    cx, cy = np.linalg.solve(2.0 * M, [-D, -E])
    Fc = A * cx * cx + B * cx * cy + C * cy * cy + D * cx + E * cy + F
    lam, vec = np.linalg.eigh(M)
    k = -Fc / lam
    if (k <= 0).any():
        raise DegenerateFit("imaginary ellipse")
    axes = np.sqrt(k)
    # smaller eigenvalue <-> longer axis
    major_dir = vec[:, 0]
    theta = math.atan2(major_dir[1], major_dir[0])
    if theta <= -math.pi / 2:
        theta += math.pi
    elif theta > math.pi / 2:
        theta -= math.pi
    return EllipseFit((float(cx), float(cy)), float(axes[0]), float(axes[1]), theta)


def fit_ellipse(points) -> EllipseFit:
    return conic_to_ellipse(fit_conic(points))


def classify_torso(e: EllipseFit, bands: TorsoBands = TorsoBands()) -> bool:
    return (bands.major[0] <= e.semi_major <= bands.major[1]
            and bands.minor[0] <= e.semi_minor <= bands.minor[1])
