"""Crowd scenario generation: Gaussian hotspots over a uniform background."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import Area, Scenario

PAPER_AREA = Area(0.0, 600.0, 0.0, 600.0)
PAPER_GBS = (100.0, 250.0)
PAPER_HOTSPOTS = ((200.0, 250.0), (150.0, 20.0), (340.0, 430.0), (400.0, 340.0), (480.0, 430.0))


@dataclass(frozen=True)
class Hotspot:
    center: tuple[float, float]
    std_dev_m: float
    weight: float


@dataclass(frozen=True)
class CrowdSpec:
    area: Area
    n_total: int
    hotspots: tuple[Hotspot, ...] = ()
    uniform_weight: float = 0.0
    seed: int = 0
    gbs: tuple[float, float] | None = None


def generate_points(spec: CrowdSpec) -> np.ndarray:
    weights = np.array([h.weight for h in spec.hotspots] + [spec.uniform_weight], dtype=float)
    if np.any(weights < 0) or weights.sum() <= 0:
        raise ValueError("crowd weights must be non-negative with at least one positive")
    p = weights / weights.sum()
    rng = np.random.default_rng(spec.seed)
    a = spec.area
    out = np.empty((spec.n_total, 2))
    for i in range(spec.n_total):
        comp = rng.choice(len(p), p=p)
        while True:
            if comp == len(spec.hotspots):
                pt = rng.uniform((a.x_min, a.y_min), (a.x_max, a.y_max))
            else:
                h = spec.hotspots[comp]
                pt = rng.normal(h.center, h.std_dev_m)
            if a.contains(pt[0], pt[1]):
                break
        out[i] = pt
    return out


def generate_scenario(spec: CrowdSpec) -> Scenario:
    a = spec.area
    gbs = spec.gbs if spec.gbs is not None else ((a.x_min + a.x_max) / 2, (a.y_min + a.y_max) / 2)
    return Scenario.from_points(a, gbs, generate_points(spec))


# ----------------------------------------------------------------- presets

PAPER_STD_DEV_M = 30.0
PAPER_HOTSPOT_SHARE = 0.8


def paper_crowd(n: int = 500, seed: int = 0) -> CrowdSpec:
    """Five equal hotspots carrying 80% of the weight over a uniform background."""
    each = PAPER_HOTSPOT_SHARE / len(PAPER_HOTSPOTS)
    spots = tuple(Hotspot(c, PAPER_STD_DEV_M, each) for c in PAPER_HOTSPOTS)
    return CrowdSpec(PAPER_AREA, n, spots, 1.0 - PAPER_HOTSPOT_SHARE, seed, PAPER_GBS)


def uniform_crowd(n: int = 500, seed: int = 0, gbs=PAPER_GBS) -> CrowdSpec:
    return CrowdSpec(PAPER_AREA, n, (), 1.0, seed, gbs)


PRESETS = {"paper": paper_crowd, "uniform": uniform_crowd}


def crowd_to_dict(spec: CrowdSpec) -> dict:
    return {
        "area": [spec.area.x_min, spec.area.x_max, spec.area.y_min, spec.area.y_max],
        "n_total": spec.n_total,
        "hotspots": [{"center": list(h.center), "std_dev_m": h.std_dev_m, "weight": h.weight} for h in spec.hotspots],
        "uniform_weight": spec.uniform_weight,
        "seed": spec.seed,
        "gbs": list(spec.gbs) if spec.gbs is not None else None,
    }


def crowd_from_dict(d: dict) -> CrowdSpec:
    spots = tuple(Hotspot(tuple(h["center"]), float(h["std_dev_m"]), float(h["weight"])) for h in d.get("hotspots", ()))
    gbs = d.get("gbs")
    return CrowdSpec(
        Area(*(float(v) for v in d["area"])),
        int(d["n_total"]),
        spots,
        float(d.get("uniform_weight", 0.0)),
        int(d.get("seed", 0)),
        tuple(gbs) if gbs is not None else None,
    )
