"""Planar geometry for coverage disks and the altitude/coverage-radius relation."""
from __future__ import annotations

import math
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .channel import atg_mean_path_loss_db
from .model import Environment, SystemConfig

MEC_EPS = 1e-9


class Circle(NamedTuple):
    x: float
    y: float
    radius: float

    def contains(self, p, eps: float = MEC_EPS) -> bool:
        return math.hypot(p[0] - self.x, p[1] - self.y) <= self.radius + eps


# ------------------------------------------------------- elevation / altitude


def elevation_residual(theta_rad: float, env: Environment) -> float:
    """Stationarity condition of the edge path loss in the elevation angle (radians)."""
    e = math.exp(-env.b * (math.degrees(theta_rad) - env.a))
    return (math.pi / (9.0 * math.log(10.0))) * math.tan(theta_rad) + (
        env.a * env.b * (env.eta_los - env.eta_nlos) * e / (env.a * e + 1.0) ** 2
    )


@lru_cache(maxsize=64)
def optimal_elevation_angle(env: Environment) -> float:
    """Root in (0, pi/2) of the loss-minimizing elevation condition, by bisection."""
    lo, hi = 1e-9, math.pi / 2 - 1e-9
    f_lo, f_hi = elevation_residual(lo, env), elevation_residual(hi, env)
    if not (f_lo < 0 < f_hi):
        raise ValueError(f"no elevation-angle root for environment {env}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = elevation_residual(mid, env)
        if f_mid == 0.0 or hi - lo < 1e-16:
            break
        if f_mid < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class Altitude(NamedTuple):
    altitude_m: float
    clamped: bool
    loss_violation: bool


def altitude_for_radius(r_m: float, env: Environment, config: SystemConfig) -> Altitude:
    if r_m <= 0:
        raise ValueError("coverage radius must be positive")
    h = r_m * math.tan(optimal_elevation_angle(env))
    hc = min(max(h, config.h_min_m), config.h_max_m)
    edge = atg_mean_path_loss_db(hc, r_m, env, config.fc_hz, config.speed_of_light)
    return Altitude(hc, hc != h, edge > config.l_allowable_db)


def _edge_loss_radius(env: Environment, config: SystemConfig) -> float:
    """Radius along the optimal elevation ray where the edge loss reaches the allowable loss."""
    t = math.tan(optimal_elevation_angle(env))

    def excess(r):
        return atg_mean_path_loss_db(r * t, r, env, config.fc_hz, config.speed_of_light) - config.l_allowable_db

    lo, hi = 1e-6, 1.0
    if excess(lo) >= 0:
        return 0.0
    while excess(hi) < 0:
        hi *= 2.0
        if hi > 1e9:
            return math.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@lru_cache(maxsize=64)
def _radius_bounds(env: Environment, h_min: float, h_max: float, config: SystemConfig):
    t = math.tan(optimal_elevation_angle(env))
    return h_min / t, min(h_max / t, _edge_loss_radius(env, config))


def radius_bounds(env: Environment, config: SystemConfig) -> tuple[float, float]:
    return _radius_bounds(env, config.h_min_m, config.h_max_m, config)


# ------------------------------------------------------ minimum enclosing circle


def _circle_two(a, b) -> Circle:
    cx, cy = (a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0
    return Circle(cx, cy, math.hypot(a[0] - cx, a[1] - cy))


def _circle_three(a, b, c) -> Circle | None:
    ax, ay = a
    bx, by = b[0] - ax, b[1] - ay
    cx, cy = c[0] - ax, c[1] - ay
    d = 2.0 * (bx * cy - by * cx)
    if d == 0.0:
        return None
    b2, c2 = bx * bx + by * by, cx * cx + cy * cy
    ux = (cy * b2 - by * c2) / d
    uy = (bx * c2 - cx * b2) / d
    return Circle(ax + ux, ay + uy, math.hypot(ux, uy))


def _circle_with_two(pts, p, q) -> Circle:
    c = _circle_two(p, q)
    for r in pts:
        if not c.contains(r):
            cc = _circle_three(p, q, r)
            if cc is None:
                # collinear: widest diameter pair
                cands = [_circle_two(p, r), _circle_two(q, r)]
                cc = max(cands, key=lambda z: z.radius)
            c = cc
    return c


def _circle_with_one(pts, p) -> Circle:
    c = Circle(p[0], p[1], 0.0)
    for i, q in enumerate(pts):
        if not c.contains(q):
            c = _circle_with_two(pts[:i], p, q)
    return c


def minimum_enclosing_circle(points, seed: int = 0) -> Circle:
    """Smallest circle enclosing `points` (Welzl's incremental algorithm on a seeded shuffle)."""
    pts = [(float(x), float(y)) for x, y in np.asarray(points, dtype=float).reshape(-1, 2)]
    if not pts:
        raise ValueError("minimum enclosing circle of an empty set")
    order = np.random.default_rng(seed).permutation(len(pts))
    pts = [pts[i] for i in order]
    c = Circle(pts[0][0], pts[0][1], 0.0)
    for i in range(1, len(pts)):
        p = pts[i]
        if not c.contains(p):
            c = _circle_with_one(pts[:i], p)
    return c


# ---------------------------------------------------------------- overlap


def circle_overlap_area(c1: Circle, c2: Circle) -> float:
    r1, r2 = c1.radius, c2.radius
    d = math.hypot(c1.x - c2.x, c1.y - c2.y)
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        return math.pi * min(r1, r2) ** 2
    a1 = r1 * r1 * math.acos(max(-1.0, min(1.0, (d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1))))
    a2 = r2 * r2 * math.acos(max(-1.0, min(1.0, (d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2))))
    tri = 0.5 * math.sqrt(max(0.0, (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)))
    return a1 + a2 - tri


def total_overlap_area(circles) -> float:
    """Sum of pairwise lens areas (no inclusion-exclusion for triple overlaps)."""
    circles = list(circles)
    total = 0.0
    for i in range(len(circles)):
        for j in range(i + 1, len(circles)):
            total += circle_overlap_area(circles[i], circles[j])
    return total
