"""Data-driven 3D placement: GBS-first association, bounded k search, clustering, MEC refinement, re-association."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import channel
from .clustering import balanced_kmeans
from .geometry import altitude_for_radius, minimum_enclosing_circle, radius_bounds
from .metrics import account
from .model import GBS_TAG, UNSERVED, Placement, Scenario, SystemConfig, make_placement

log = logging.getLogger(__name__)

MOVE_TOL_M = 1e-6


@dataclass(frozen=True)
class DdpOutcome:
    placement: Placement
    k_searched: tuple[int, ...]
    feasible: bool
    satisfied_count: int
    satisfaction: float
    wall_time_s: float
    k_lower: int = 0
    k_upper: int = 0
    reason: str = ""
    inner_iterations: tuple[int, ...] = ()
    regions: tuple = field(default=())
    boundary_dbs: tuple[int, ...] = ()

    @property
    def k(self) -> int:
        return self.placement.k


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts]).generate_state(1)[0])


# ----------------------------------------------------------- initialization


def interference_free_gbs_sinr(points: np.ndarray, gbs, config: SystemConfig) -> np.ndarray:
    r = np.hypot(points[:, 0] - gbs[0], points[:, 1] - gbs[1])
    return channel.gbs_received_mw(r, config) / (config.b_hz * config.n0_mw_hz)


def gbs_capacity_in_ues(config: SystemConfig) -> int | float:
    """GBS capacity counted in minimum-rate users; unbounded when no minimum rate is asked."""
    if config.c_min_bps <= 0:
        return math.inf
    return int(math.floor(config.c_hat_gbs_bps / config.c_min_bps + 1e-9))


def initial_gbs_association(scenario: Scenario, config: SystemConfig) -> np.ndarray:
    """Tag the best-served UEs (up to the GBS's capacity in minimum-rate users) as GBS; others -1."""
    sinr = interference_free_gbs_sinr(scenario.points, scenario.gbs, config)
    qualifies = sinr >= config.gamma_th
    n_g = int(min(int(qualifies.sum()), gbs_capacity_in_ues(config)))
    order = np.argsort(-sinr, kind="stable")
    assoc = np.full(scenario.n, UNSERVED, dtype=int)
    assoc[order[:n_g]] = GBS_TAG
    return assoc


def _spectral_efficiency(gamma_db: float) -> float:
    return math.log2(1.0 + 10.0 ** (gamma_db / 10.0))


def k_lower_bound(n_unserved: int, config: SystemConfig) -> int:
    if n_unserved <= 0:
        return 0
    x = config.tau * n_unserved * config.c_min_bps / (config.b_hz * _spectral_efficiency(config.gamma_th_db))
    return int(math.ceil(round(x, 9)))


def k_upper_bound(config: SystemConfig) -> int:
    ratio = (config.b_bk_hz * _spectral_efficiency(config.gamma_th_bk_db)) / (
        config.b_hz * _spectral_efficiency(config.gamma_th_db)
    )
    return min(int(math.floor(round(ratio, 9))), config.k_max_cap)


# ------------------------------------------------------------- refinement


def site_for_circle(x: float, y: float, radius: float, config: SystemConfig) -> list[float]:
    r_min, r_max = radius_bounds(config.env, config)
    r = min(max(radius, r_min), r_max)
    return [x, y, altitude_for_radius(r, config.env, config).altitude_m, r]


def refine_placement(clusters, points: np.ndarray, config: SystemConfig, seed: int = 0) -> np.ndarray:
    """One DBS per cluster at the center of the members' minimum enclosing circle; rows (x, y, h, r)."""
    rows = []
    for j, members in enumerate(clusters):
        members = np.asarray(members, dtype=int)
        if members.size == 0:
            raise ValueError(f"cluster {j} is empty")
        c = minimum_enclosing_circle(points[members], seed=derive_seed(seed, j))
        rows.append(site_for_circle(c.x, c.y, c.radius, config))
    return np.array(rows, dtype=float).reshape(-1, 4)


def centroid_sites(clusters, points: np.ndarray, config: SystemConfig) -> np.ndarray:
    """Baseline placement: cluster mean, radius to the farthest member."""
    rows = []
    for members in clusters:
        m = points[np.asarray(members, dtype=int)]
        cx, cy = m.mean(axis=0)
        rows.append(site_for_circle(cx, cy, float(np.hypot(m[:, 0] - cx, m[:, 1] - cy).max()), config))
    return np.array(rows, dtype=float).reshape(-1, 4)


# ----------------------------------------------------------- re-association


def failing_mask(table: channel.LinkTable, acc) -> np.ndarray:
    return (table.assoc == UNSERVED) | ((table.assoc >= 0) & ~acc.satisfied)


def reassociate(sites, assoc, points, gbs, config: SystemConfig, table=None):
    """Move every failing UE to the nearest other covering DBS that can serve it; else mark it -1.

    UEs are visited in index order against the link state at entry; cell
    loads are updated as moves are made. Returns (new_assoc, changed).
    """
    sites = np.asarray(sites, dtype=float).reshape(-1, 4)
    assoc = np.asarray(assoc, dtype=int)
    if table is None:
        table = channel.link_table(points, gbs, sites, assoc, config)
    acc = account(table, sites, gbs, config)
    new = assoc.copy()
    k = sites.shape[0]
    counts = table.n_per_dbs.astype(int).copy()
    cap = acc.backhaul_cap
    p_ue = table.per_ue_power_mw
    i_gbs = channel.gbs_received_mw(table.r_gbs, config)
    n0 = config.n0_mw_hz
    for i in np.nonzero(failing_mask(table, acc))[0]:
        home = assoc[i]
        cand = [j for j in np.nonzero(table.cover[i])[0] if j + 1 != home] if k else []
        cand.sort(key=lambda j: (table.horiz[i, j], j))
        moved = False
        for j in cand:
            m = counts[j] + 1
            if m * config.c_min_bps > cap[j] * (1 + 1e-12):
                continue
            power = config.p_dbs_mw / m
            interf = i_gbs[i] + float(
                sum(p_ue[jj] * table.gain[i, jj] for jj in np.nonzero(table.cover[i])[0] if jj != j)
            )
            bw = config.b_hz / m
            sinr = power * table.gain[i, j] / (interf + bw * n0)
            rate = min(bw * math.log2(1.0 + sinr), cap[j] / m)
            if sinr >= config.gamma_th and rate >= config.c_min_bps:
                if home > 0:
                    counts[home - 1] -= 1
                counts[j] += 1
                new[i] = j + 1
                moved = True
                break
        if not moved and home != UNSERVED:
            if home > 0:
                counts[home - 1] -= 1
            new[i] = UNSERVED
    return new, bool(np.any(new != assoc))


def settle(sites, assoc, points, gbs, config: SystemConfig):
    """Drop tagged UEs that fail their constraints until every tagged UE is satisfied."""
    assoc = np.asarray(assoc, dtype=int).copy()
    while True:
        table = channel.link_table(points, gbs, sites, assoc, config)
        acc = account(table, sites, gbs, config)
        bad = (assoc >= 0) & ~acc.satisfied
        if not bad.any():
            return assoc, table, acc
        assoc[bad] = UNSERVED


# -------------------------------------------------------------------- run


@dataclass
class _Trial:
    sites: np.ndarray
    assoc: np.ndarray
    satisfied: int
    iterations: int


def _solve_fixed_k(points, gbs, base_assoc, k: int, config: SystemConfig, seed: int, refine: bool = True) -> _Trial:
    """Cluster the untagged UEs into k groups and iterate refinement / re-association."""
    assoc = base_assoc.copy()
    free = np.nonzero(assoc == UNSERVED)[0]
    if k == 0 or free.size == 0:
        sites = np.zeros((0, 4))
        assoc, _, acc = settle(sites, assoc, points, gbs, config) if refine else (assoc, None, None)
        if acc is None:
            acc = account(channel.link_table(points, gbs, sites, assoc, config), sites, gbs, config)
        return _Trial(sites, assoc, int(acc.satisfied.sum()), 0)

    k = min(k, free.size)
    cl = balanced_kmeans(points[free], k, seed=derive_seed(seed, k), max_iters=config.kmeans_max_iters)
    assoc[free] = cl.labels + 1
    clusters = [free[cl.labels == j] for j in range(k)]

    if not refine:
        sites = centroid_sites(clusters, points, config)
        horiz = np.hypot(points[free, 0] - sites[cl.labels, 0], points[free, 1] - sites[cl.labels, 1])
        outside = horiz > sites[cl.labels, 3] + channel.COVER_EPS
        assoc[free[outside]] = UNSERVED
        acc = account(channel.link_table(points, gbs, sites, assoc, config), sites, gbs, config)
        return _Trial(sites, assoc, int(acc.satisfied.sum()), 0)

    sites = refine_placement(clusters, points, config, seed=seed)
    best = None
    it = 0
    for it in range(1, config.inner_iter_cap + 1):
        table = channel.link_table(points, gbs, sites, assoc, config)
        acc = account(table, sites, gbs, config)
        sat = int(acc.satisfied.sum())
        if best is None or sat > best.satisfied:
            best = _Trial(sites.copy(), assoc.copy(), sat, it)
        new_assoc, changed = reassociate(sites, assoc, points, gbs, config, table=table)
        new_sites = sites.copy()
        for j in range(k):
            members = np.nonzero(new_assoc == j + 1)[0]
            if members.size:
                new_sites[j] = refine_placement([members], points, config, seed=derive_seed(seed, j))[0]
        moved = float(np.abs(new_sites[:, :2] - sites[:, :2]).max()) if k else 0.0
        sites, assoc = new_sites, new_assoc
        if not changed and moved <= MOVE_TOL_M:
            break
    else:
        log.debug("inner loop hit cap %d at k=%d", config.inner_iter_cap, k)
        sites, assoc = best.sites, best.assoc

    assoc, _, acc = settle(sites, assoc, points, gbs, config)
    return _Trial(sites, assoc, int(acc.satisfied.sum()), it)


def _target(n: int, tau: float) -> int:
    return int(math.ceil(round(tau * n, 9)))


def search_k(
    points: np.ndarray,
    gbs,
    base_assoc: np.ndarray,
    config: SystemConfig,
    seed: int,
    k_override: int | None = None,
    refine: bool = True,
    k_upper: int | None = None,
) -> tuple[_Trial, list[int], bool, int, int, str]:
    """Outer k loop over one set of UEs. Returns (trial, k values tried, feasible, k_lo, k_hi, reason)."""
    n = points.shape[0]
    n_free = int(np.sum(base_assoc == UNSERVED))
    need = _target(n, config.tau)
    if k_override is not None:
        t = _solve_fixed_k(points, gbs, base_assoc, k_override, config, seed, refine)
        return t, [k_override], t.satisfied >= need, k_override, k_override, ""

    k_lo = k_lower_bound(n_free, config)
    if k_upper is None:
        k_upper = config.k_max_cap if config.ignore_backhaul_k_cap else k_upper_bound(config)
    k_hi = min(k_upper, max(n_free, 0))
    tried, best = [], None
    if k_hi < k_lo:
        t = _solve_fixed_k(points, gbs, base_assoc, 0, config, seed, refine)
        return t, tried, t.satisfied >= need and k_lo == 0, k_lo, k_hi, (
            f"infeasible by bounds: k_lower={k_lo} > k_upper={k_hi}"
        )
    for k in range(k_lo, k_hi + 1):
        t = _solve_fixed_k(points, gbs, base_assoc, k, config, seed, refine)
        tried.append(k)
        if best is None or t.satisfied > best.satisfied:
            best = t
        if t.satisfied >= need:
            return t, tried, True, k_lo, k_hi, ""
    return best, tried, False, k_lo, k_hi, f"satisfaction target {need} not reached up to k={k_hi}"


def run_ddp(
    scenario: Scenario,
    config: SystemConfig,
    seed: int = 0,
    k_override: int | None = None,
    refine: bool = True,
) -> DdpOutcome:
    """Full placement search. `refine=False` with `k_override` is the plain balanced k-means baseline."""
    t0 = time.perf_counter()
    points = scenario.points
    base = initial_gbs_association(scenario, config)
    trial, tried, feasible, k_lo, k_hi, reason = search_k(
        points, scenario.gbs, base, config, seed, k_override=k_override, refine=refine
    )
    wall = time.perf_counter() - t0
    table = channel.link_table(points, scenario.gbs, trial.sites, trial.assoc, config)
    placement = make_placement(trial.sites, trial.assoc, table.sinr_db)
    return DdpOutcome(
        placement=placement,
        k_searched=tuple(tried),
        feasible=feasible,
        satisfied_count=trial.satisfied,
        satisfaction=trial.satisfied / scenario.n,
        wall_time_s=wall,
        k_lower=k_lo,
        k_upper=k_hi,
        reason=reason,
        inner_iterations=(trial.iterations,),
    )
