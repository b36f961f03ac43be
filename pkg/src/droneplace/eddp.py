"""Enhanced DDP: split the area along the GBS coordinates, solve regions in parallel, merge."""
from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import channel
from .ddp import (
    DdpOutcome,
    _target,
    derive_seed,
    initial_gbs_association,
    k_upper_bound,
    reassociate,
    run_ddp,
    search_k,
    settle,
)
from .model import UNSERVED, Area, Scenario, SystemConfig, make_placement


class PartitionKind(str, Enum):
    NONE = "none"
    SPLIT_X = "split_x"   # cut along x = x_G
    SPLIT_Y = "split_y"   # cut along y = y_G
    QUAD = "quad"


@dataclass(frozen=True)
class PartitionPlan:
    kind: PartitionKind
    areas: tuple[Area, ...]
    x_line: float | None = None
    y_line: float | None = None


def classify_partition(area: Area, gbs, r_g: float) -> PartitionPlan:
    xg, yg = float(gbs[0]), float(gbs[1])
    if not area.contains(xg, yg):
        raise ValueError(f"gbs {gbs} outside area")
    x_far = (xg - area.x_min) > r_g and (area.x_max - xg) > r_g
    y_far = (yg - area.y_min) > r_g and (area.y_max - yg) > r_g
    left, right = Area(area.x_min, xg, area.y_min, area.y_max), Area(xg, area.x_max, area.y_min, area.y_max)
    low, high = Area(area.x_min, area.x_max, area.y_min, yg), Area(area.x_min, area.x_max, yg, area.y_max)
    if x_far and y_far:
        quads = (
            Area(area.x_min, xg, area.y_min, yg),
            Area(xg, area.x_max, area.y_min, yg),
            Area(area.x_min, xg, yg, area.y_max),
            Area(xg, area.x_max, yg, area.y_max),
        )
        return PartitionPlan(PartitionKind.QUAD, quads, xg, yg)
    if x_far:
        return PartitionPlan(PartitionKind.SPLIT_X, (left, right), x_line=xg)
    if y_far:
        return PartitionPlan(PartitionKind.SPLIT_Y, (low, high), y_line=yg)
    return PartitionPlan(PartitionKind.NONE, (area,))


def region_index(points: np.ndarray, plan: PartitionPlan) -> np.ndarray:
    """Region of each point; points on a cut line go to the lower-coordinate side."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    right = pts[:, 0] > plan.x_line if plan.x_line is not None else np.zeros(len(pts), dtype=bool)
    upper = pts[:, 1] > plan.y_line if plan.y_line is not None else np.zeros(len(pts), dtype=bool)
    if plan.kind is PartitionKind.QUAD:
        return right.astype(int) + 2 * upper.astype(int)
    if plan.kind is PartitionKind.SPLIT_X:
        return right.astype(int)
    if plan.kind is PartitionKind.SPLIT_Y:
        return upper.astype(int)
    return np.zeros(len(pts), dtype=int)


# ------------------------------------------------------------ analytic view


def partition_probabilities(area: Area, r_g: float) -> tuple[float, float, float]:
    ax, ay = area.width, area.height
    p1 = 4.0 * r_g * r_g / (ax * ay)
    p2 = 2.0 * r_g * (ax + ay - 4.0 * r_g) / (ax * ay)
    p4 = (ax - 2.0 * r_g) * (ay - 2.0 * r_g) / (ax * ay)
    return p1, p2, p4


def expected_complexity_reduction(area: Area, r_g: float) -> tuple[float, bool]:
    """Average fraction of cubic work saved by pre-partitioning a uniformly placed GBS.

    Returns (reduction, valid); valid is False (and reduction 0) when a side is
    not longer than 2 r_g.
    """
    ax, ay = area.width, area.height
    if not (ax > 2.0 * r_g and ay > 2.0 * r_g):
        return 0.0, False
    return 1.0 - (ax + 14.0 * r_g) * (ay + 14.0 * r_g) / (64.0 * ax * ay), True


# ------------------------------------------------------------------- solve


def split_k(total: int, loads) -> list[int]:
    """Largest-remainder split of `total` DBSs over regions by load; loaded regions get at least one."""
    loads = np.asarray(loads, dtype=float)
    out = np.zeros(len(loads), dtype=int)
    live = np.nonzero(loads > 0)[0]
    if total <= 0 or live.size == 0:
        return out.tolist()
    if total < live.size:
        keep = live[np.argsort(-loads[live], kind="stable")[:total]]
        out[keep] = 1
        return out.tolist()
    out[live] = 1
    rest = total - live.size
    quota = rest * loads[live] / loads[live].sum()
    base = np.floor(quota).astype(int)
    out[live] += base
    left = rest - base.sum()
    order = np.argsort(-(quota - base), kind="stable")[:left]
    out[live[order]] += 1
    return out.tolist()


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("DRONEPLACE_THREADS", "4")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class RegionResult:
    index: int
    n: int
    k: int
    k_searched: tuple[int, ...]
    feasible: bool
    satisfied: int
    reason: str


def run_eddp(
    scenario: Scenario,
    config: SystemConfig,
    seed: int = 0,
    k_override: int | None = None,
    threads: int | None = None,
) -> DdpOutcome:
    """Partitioned placement. `k_override` fixes the total DBS count, split across regions by load."""
    t0 = time.perf_counter()
    r_g = channel.gbs_coverage_radius(config)
    plan = classify_partition(scenario.area, scenario.gbs, r_g)
    if plan.kind is PartitionKind.NONE:
        out = run_ddp(scenario, config, seed=seed, k_override=k_override)
        return out

    points = scenario.points
    gbs = scenario.gbs
    region = region_index(points, plan)
    members = [np.nonzero(region == r)[0] for r in range(len(plan.areas))]
    # only the region holding the GBS starts with GBS-tagged UEs
    home = int(region_index(np.asarray(gbs, dtype=float), plan)[0])
    base = np.full(scenario.n, UNSERVED, dtype=int)
    if members[home].size:
        local = Scenario.from_points(plan.areas[home], gbs, points[members[home]])
        base[members[home]] = initial_gbs_association(local, config)
    free_load = [int(np.sum(base[m] == UNSERVED)) for m in members]
    k_parts = split_k(k_override, free_load) if k_override is not None else [None] * len(members)

    def solve(r):
        idx = members[r]
        if idx.size == 0:
            return r, None
        return r, search_k(
            points[idx], gbs, base[idx], config, derive_seed(seed, r), k_override=k_parts[r]
        )

    n_threads = threads or _threads()
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=min(n_threads, len(members))) as pool:
            solved = dict(pool.map(solve, range(len(members))))
    else:
        solved = dict(solve(r) for r in range(len(members)))

    # merge in region order
    sites, assoc = [], base.copy()
    regions, tried, feasible, reasons = [], [], True, []
    for r, idx in enumerate(members):
        res = solved[r]
        if res is None:
            regions.append(RegionResult(r, 0, 0, (), True, 0, "empty"))
            continue
        trial, k_tried, ok, k_lo, k_hi, reason = res
        offset = len(sites)
        local = trial.assoc.copy()
        local[local > 0] += offset
        assoc[idx] = local
        sites.extend(trial.sites.tolist())
        feasible &= ok
        if not ok:
            reasons.append(f"region {r}: {reason or 'target not met'}")
        tried.extend(k_tried)
        regions.append(RegionResult(r, int(idx.size), trial.sites.shape[0], tuple(k_tried), ok, trial.satisfied, reason))
    sites = np.array(sites, dtype=float).reshape(-1, 4)

    k_total = sites.shape[0]
    k_cap = config.k_max_cap if config.ignore_backhaul_k_cap else k_upper_bound(config)
    if k_override is None and k_total > k_cap:
        feasible = False
        reasons.append(f"merged k={k_total} exceeds upper bound {k_cap}")

    boundary = boundary_dbs(sites, plan)
    assoc, _ = reassociate(sites, assoc, points, gbs, config)
    assoc, table, acc = settle(sites, assoc, points, gbs, config)
    satisfied = int(acc.satisfied.sum())
    if satisfied < _target(scenario.n, config.tau) and k_override is None:
        feasible = False
        reasons.append("merged satisfaction below target")
    wall = time.perf_counter() - t0
    return DdpOutcome(
        placement=make_placement(sites, assoc, table.sinr_db),
        k_searched=tuple(tried),
        feasible=feasible if k_override is None else satisfied >= _target(scenario.n, config.tau),
        satisfied_count=satisfied,
        satisfaction=satisfied / scenario.n,
        wall_time_s=wall,
        reason="; ".join(reasons),
        regions=tuple(regions),
        boundary_dbs=tuple(int(j) + 1 for j in boundary),
    )


def boundary_dbs(sites: np.ndarray, plan: PartitionPlan) -> np.ndarray:
    """Indices of DBSs whose coverage disk crosses a partition line."""
    sites = np.asarray(sites, dtype=float).reshape(-1, 4)
    hit = np.zeros(sites.shape[0], dtype=bool)
    if plan.x_line is not None:
        hit |= np.abs(sites[:, 0] - plan.x_line) < sites[:, 3]
    if plan.y_line is not None:
        hit |= np.abs(sites[:, 1] - plan.y_line) < sites[:, 3]
    return np.nonzero(hit)[0]


def empirical_partition_frequencies(area: Area, r_g: float, n: int = 10_000, seed: int = 0):
    """Monte Carlo frequencies of (no split, two-way, four-way) for uniform GBS positions."""
    rng = np.random.default_rng(seed)
    xs = rng.uniform(area.x_min, area.x_max, n)
    ys = rng.uniform(area.y_min, area.y_max, n)
    counts = {PartitionKind.NONE: 0, PartitionKind.SPLIT_X: 0, PartitionKind.SPLIT_Y: 0, PartitionKind.QUAD: 0}
    for x, y in zip(xs, ys):
        counts[classify_partition(area, (x, y), r_g).kind] += 1
    return (
        counts[PartitionKind.NONE] / n,
        (counts[PartitionKind.SPLIT_X] + counts[PartitionKind.SPLIT_Y]) / n,
        counts[PartitionKind.QUAD] / n,
    )

