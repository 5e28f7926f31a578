"""Projected ellipse of a fuzzy sphere and its size/shape descriptors."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .membrane import InvariantCoords, MembraneConfig, invariants
from .numerics import bisect_root, complete_elliptic_e

ALPHA = 4.0 * math.sqrt(2.0)
BETA = 2.0 * math.pi - ALPHA


@dataclass(frozen=True)
class EllipseGeometry:
    a: float
    b: float
    theta: float
    A: float
    E1: float
    E3: float
    L_exact: float
    L_approx: float
    S: float
    S_exact: float

    def to_dict(self) -> dict:
        return asdict(self)


def conic_matrix(cfg: MembraneConfig) -> np.ndarray:
    """Quadratic form M with boundary {q : q^T M q = V}."""
    xx, yy, xy = cfg.x @ cfg.x, cfg.y @ cfg.y, cfg.x @ cfg.y
    return np.array([[yy, -xy], [-xy, xx]])


def _wrap_half_turn(theta: float) -> float:
    theta = (theta + math.pi / 2) % math.pi - math.pi / 2
    return -math.pi / 2 if theta >= math.pi / 2 else theta


def principal_axes(cfg: MembraneConfig) -> tuple[float, float, float]:
    """Semi-axes (a >= b) and major-axis angle in [-pi/2, pi/2).

    The eigenvalues of the conic matrix are U +- sqrt(U^2 - V) and the
    semi-axes are their square roots. The major axis is the leading
    eigenvector of the Gram matrix [[x.x, x.y], [x.y, y.y]], which stays
    well defined for needles (V = 0).
    """
    inv = invariants(cfg)
    d = math.sqrt(max(inv.U * inv.U - inv.V, 0.0))
    a = math.sqrt(inv.U + d)
    # U - d cancels badly when V << U^2; V / (U + d) is the same number
    b = math.sqrt(inv.V / (inv.U + d)) if inv.U > 0 else 0.0
    xx, yy, xy = cfg.x @ cfg.x, cfg.y @ cfg.y, cfg.x @ cfg.y
    if a == b:
        theta = 0.0
    else:
        theta = _wrap_half_turn(0.5 * math.atan2(2.0 * xy, xx - yy))
    return a, b, theta


def area(inv: InvariantCoords) -> float:
    """Two-side area 2 pi sqrt(V)."""
    return 2.0 * math.pi * math.sqrt(inv.V)


def eccentricity3(inv: InvariantCoords) -> float:
    return (1.0 - inv.W) ** 0.25


def eccentricity1_to_3(e1: float) -> float:
    return e1 / math.sqrt(2.0 - e1 * e1)


def perimeter_exact(a: float, b: float) -> float:
    """4 a E(1 - b^2/a^2)."""
    if b < 0 or a < b:
        raise ValueError(f"need a >= b >= 0, got a={a!r}, b={b!r}")
    if a == 0:
        return 0.0
    return 4.0 * a * complete_elliptic_e(1.0 - (b / a) ** 2)


def perimeter_approx(inv: InvariantCoords) -> float:
    """alpha sqrt(U) + beta V^(1/4); exact for circles and needles."""
    return ALPHA * math.sqrt(inv.U) + BETA * inv.V**0.25


def shape_param(inv: InvariantCoords) -> float:
    """L^2 / (4 pi * one-side area) with the approximate perimeter.

    Returns ``math.inf`` for needles (V = 0).
    """
    if inv.V <= 0:
        return math.inf
    return perimeter_approx(inv) ** 2 / (4.0 * math.pi**2 * math.sqrt(inv.V))


def shape_param_exact(a: float, b: float) -> float:
    if b <= 0:
        return math.inf
    return perimeter_exact(a, b) ** 2 / (4.0 * math.pi * math.pi * a * b)


def aspect_ratio_from_shape(s: float, tol: float = 1e-12) -> float:
    """Axis ratio a/b of the ellipse whose exact shape parameter is ``s``."""
    if s < 1 - 1e-12:
        raise ValueError(f"shape parameter must be >= 1, got {s!r}")
    if s <= 1:
        # rounding can put near-circles a hair below 1
        return 1.0
    g = lambda r: shape_param_exact(r, 1.0) - s  # noqa: E731
    hi = 2.0
    while g(hi) < 0:
        hi *= 2.0
    return bisect_root(g, 1.0, hi, tol)


def ellipse_geometry(cfg: MembraneConfig) -> EllipseGeometry:
    inv = invariants(cfg)
    a, b, theta = principal_axes(cfg)
    e1 = math.sqrt(max(1.0 - (b / a) ** 2, 0.0)) if a > 0 else 0.0
    return EllipseGeometry(
        a=a,
        b=b,
        theta=theta,
        A=area(inv),
        E1=e1,
        E3=eccentricity3(inv) if a > 0 else 0.0,
        L_exact=perimeter_exact(a, b),
        L_approx=perimeter_approx(inv),
        S=shape_param(inv),
        S_exact=shape_param_exact(a, b),
    )


def boundary_polyline(geom: EllipseGeometry, n: int) -> np.ndarray:
    """``n`` boundary points, shape (n, 2), starting on the major axis."""
    if n < 3:
        raise ValueError("need at least 3 points")
    t = 2.0 * np.pi * np.arange(n) / n
    pts = np.stack([geom.a * np.cos(t), geom.b * np.sin(t)], axis=1)
    c, s = math.cos(geom.theta), math.sin(geom.theta)
    return pts @ np.array([[c, s], [-s, c]])


def conic_residual(geom: EllipseGeometry, pts: np.ndarray) -> np.ndarray:
    """Residual of the normalized ellipse equation at each point."""
    c, s = math.cos(geom.theta), math.sin(geom.theta)
    u = pts[:, 0] * c + pts[:, 1] * s
    v = -pts[:, 0] * s + pts[:, 1] * c
    return (u / geom.a) ** 2 + (v / geom.b) ** 2 - 1.0
