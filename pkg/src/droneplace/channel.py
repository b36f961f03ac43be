"""Propagation and rate models: mmWave backhaul, air-to-ground fronthaul, terrestrial GBS links.

Everything is computed in linear units (mW, Hz). Small-scale fading on the
terrestrial links is replaced by its mean unless explicit gains are passed in.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    GBS_TAG,
    UNSERVED,
    DbsSite,
    Environment,
    Placement,
    Scenario,
    SystemConfig,
    db_to_linear,
    linear_to_db,
)

MIN_DISTANCE_M = 1.0
COVER_EPS = 1e-9


@dataclass(frozen=True)
class LinkBudget:
    path_loss_db: float
    sinr_db: float
    bandwidth_hz: float
    rate_bps: float
    interference_gbs_mw: float = 0.0
    interference_dbs_mw: float = 0.0
    feasible: bool = True

    @property
    def interference_mw(self) -> float:
        return self.interference_gbs_mw + self.interference_dbs_mw


def shannon_rate(bandwidth_hz, sinr_linear):
    return bandwidth_hz * np.log2(1.0 + sinr_linear)


# ------------------------------------------------------------------ backhaul


def backhaul_path_loss_db(distance_m):
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("backhaul distance must be positive")
    out = 61.4 + 20.0 * np.log10(d)
    return float(out) if out.ndim == 0 else out


def backhaul_capacity(sites: np.ndarray, gbs, k: int, config: SystemConfig):
    """Vectorized backhaul SNR (linear), capacity and feasibility for (m, >=3) site rows."""
    if k < 1:
        raise ValueError("backhaul split needs k >= 1")
    sites = np.atleast_2d(np.asarray(sites, dtype=float))
    horiz = np.hypot(sites[:, 0] - gbs[0], sites[:, 1] - gbs[1])
    d = np.maximum(np.hypot(horiz, sites[:, 2]), MIN_DISTANCE_M)
    loss = backhaul_path_loss_db(d)
    bw = config.b_bk_hz / k
    snr = config.p_gbs_bk_mw * db_to_linear(-loss) / (bw * config.n0_mw_hz)
    cap = shannon_rate(bw, snr)
    return loss, snr, cap, snr >= config.gamma_th_bk


def backhaul_link(dbs: DbsSite, gbs, k: int, config: SystemConfig) -> LinkBudget:
    row = np.array([[dbs.x, dbs.y, dbs.altitude_m, dbs.radius_m]])
    loss, snr, cap, ok = backhaul_capacity(row, gbs, k, config)
    return LinkBudget(
        path_loss_db=float(loss[0]),
        sinr_db=linear_to_db(float(snr[0])),
        bandwidth_hz=config.b_bk_hz / k,
        rate_bps=float(cap[0]),
        feasible=bool(ok[0]),
    )


# ------------------------------------------------------------- air-to-ground


def elevation_deg(h_m, r_m):
    return np.degrees(np.arctan2(h_m, r_m))


def los_probability(h_m, r_m, env: Environment):
    h = np.asarray(h_m, dtype=float)
    r = np.asarray(r_m, dtype=float)
    if np.any(h <= 0):
        raise ValueError("altitude must be positive")
    if np.any(r < 0):
        raise ValueError("horizontal distance must be non-negative")
    out = 1.0 / (1.0 + env.a * np.exp(-env.b * (elevation_deg(h, r) - env.a)))
    return float(out) if out.ndim == 0 else out


def free_space_loss_db(d_m, fc_hz, c=2.997925e8):
    d = np.maximum(np.asarray(d_m, dtype=float), MIN_DISTANCE_M)
    return 20.0 * np.log10(4.0 * math.pi * fc_hz * d / c)


def atg_mean_path_loss_db(h_m, r_m, env: Environment, fc_hz: float, c: float = 2.997925e8):
    if fc_hz <= 0:
        raise ValueError("carrier frequency must be positive")
    p_los = np.asarray(los_probability(h_m, r_m, env))
    d = np.hypot(h_m, r_m)
    out = free_space_loss_db(d, fc_hz, c) + p_los * env.eta_los + (1.0 - p_los) * env.eta_nlos
    return float(out) if np.ndim(out) == 0 else out


# ------------------------------------------------------------- terrestrial


def gbs_received_mw(r_m, config: SystemConfig, gain=1.0):
    r = np.maximum(np.asarray(r_m, dtype=float), MIN_DISTANCE_M)
    return config.p_gbs_mw * gain * r ** (-config.alpha)


def gbs_coverage_radius(config: SystemConfig) -> float:
    """Interference-free GBS reach with mean fading and full-band noise."""
    noise = config.gamma_th * config.b_hz * config.n0_mw_hz
    return (config.p_gbs_mw / noise) ** (1.0 / config.alpha)


# ------------------------------------------------------------- link table


@dataclass(frozen=True)
class LinkTable:
    """Per-UE link state for one placement; arrays indexed by UE unless noted.

    `sinr` and friends are NaN for unserved UEs. DBS columns are 0-based
    (tag j maps to column j - 1).
    """

    assoc: np.ndarray
    horiz: np.ndarray          # (N, k) UE-to-DBS horizontal distance
    cover: np.ndarray          # (N, k) UE inside DBS disk
    gain: np.ndarray           # (N, k) linear ATG gain 10^(-L/10)
    n_per_dbs: np.ndarray      # (k,)
    n_gbs: int
    per_ue_power_mw: np.ndarray  # (k,) P_j / N_j, zero when idle
    total_power_mw: np.ndarray   # (k,) P_j when serving anyone
    r_gbs: np.ndarray
    signal: np.ndarray
    interference_gbs: np.ndarray
    interference_dbs: np.ndarray
    noise: np.ndarray
    bandwidth: np.ndarray
    path_loss_db: np.ndarray
    in_coverage: np.ndarray    # serving disk contains the UE (always True for GBS tags)

    @property
    def sinr(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.signal / (self.interference_gbs + self.interference_dbs + self.noise)

    @property
    def sinr_db(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return 10.0 * np.log10(self.sinr)

    @property
    def rate(self) -> np.ndarray:
        return shannon_rate(self.bandwidth, self.sinr)

    def budget(self, i: int) -> LinkBudget:
        return LinkBudget(
            path_loss_db=float(self.path_loss_db[i]),
            sinr_db=float(self.sinr_db[i]),
            bandwidth_hz=float(self.bandwidth[i]),
            rate_bps=float(self.rate[i]),
            interference_gbs_mw=float(self.interference_gbs[i]),
            interference_dbs_mw=float(self.interference_dbs[i]),
            feasible=bool(self.in_coverage[i]),
        )


def atg_gain_matrix(points: np.ndarray, sites: np.ndarray, config: SystemConfig):
    """Horizontal distances, coverage mask and linear ATG gains between UEs and DBS sites."""
    sites = np.asarray(sites, dtype=float).reshape(-1, 4)
    dx = points[:, 0, None] - sites[None, :, 0]
    dy = points[:, 1, None] - sites[None, :, 1]
    horiz = np.hypot(dx, dy)
    cover = horiz <= sites[None, :, 3] + COVER_EPS
    h = np.broadcast_to(sites[None, :, 2], horiz.shape)
    loss = atg_mean_path_loss_db(h, horiz, config.env, config.fc_hz, config.speed_of_light)
    return horiz, cover, np.asarray(loss), db_to_linear(-np.asarray(loss))


def link_table(
    points: np.ndarray,
    gbs,
    sites,
    assoc,
    config: SystemConfig,
    gbs_gain=None,
    ig_gain=None,
    _geom=None,
) -> LinkTable:
    """Compute every UE's serving link under `assoc` (0 = GBS, j = DBS j, -1 = unserved).

    gbs_gain / ig_gain are optional per-UE fading gains on the GBS signal and on
    the GBS interference seen by DBS-served UEs (mean fading when omitted).
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    sites = np.asarray(sites, dtype=float).reshape(-1, 4)
    assoc = np.asarray(assoc, dtype=int)
    n, k = points.shape[0], sites.shape[0]
    if _geom is None:
        horiz, cover, loss, gain = atg_gain_matrix(points, sites, config)
    else:
        horiz, cover, loss, gain = _geom

    n_per_dbs = np.bincount(assoc[assoc > 0] - 1, minlength=k)[:k] if k else np.zeros(0, dtype=int)
    n_gbs = int(np.sum(assoc == GBS_TAG))
    active = n_per_dbs > 0
    per_ue_power = np.where(active, config.p_dbs_mw / np.maximum(n_per_dbs, 1), 0.0)
    total_power = np.where(active, config.p_dbs_mw, 0.0)

    r_gbs = np.hypot(points[:, 0] - gbs[0], points[:, 1] - gbs[1])
    g_gain = np.ones(n) if gbs_gain is None else np.asarray(gbs_gain, dtype=float)
    i_gain = np.ones(n) if ig_gain is None else np.asarray(ig_gain, dtype=float)

    signal = np.full(n, np.nan)
    i_gbs = np.full(n, np.nan)
    i_dbs = np.full(n, np.nan)
    noise = np.full(n, np.nan)
    bw = np.full(n, np.nan)
    pl = np.full(n, np.nan)
    in_cov = np.zeros(n, dtype=bool)

    on_gbs = assoc == GBS_TAG
    if on_gbs.any():
        bw_g = config.b_hz / n_gbs
        signal[on_gbs] = gbs_received_mw(r_gbs[on_gbs], config, g_gain[on_gbs])
        i_gbs[on_gbs] = 0.0
        i_dbs[on_gbs] = (cover[on_gbs] * gain[on_gbs] * total_power[None, :]).sum(axis=1) if k else 0.0
        noise[on_gbs] = bw_g * config.n0_mw_hz
        bw[on_gbs] = bw_g
        pl[on_gbs] = -linear_to_db(gbs_received_mw(r_gbs[on_gbs], config) / config.p_gbs_mw)
        in_cov[on_gbs] = True

    on_dbs = assoc > 0
    if on_dbs.any():
        idx = np.nonzero(on_dbs)[0]
        col = assoc[idx] - 1
        contrib = cover[idx] * gain[idx] * per_ue_power[None, :]
        own = contrib[np.arange(idx.size), col]
        signal[idx] = per_ue_power[col] * gain[idx, col]
        i_dbs[idx] = contrib.sum(axis=1) - own
        i_gbs[idx] = gbs_received_mw(r_gbs[idx], config, i_gain[idx])
        bw_j = config.b_hz / n_per_dbs[col]
        noise[idx] = bw_j * config.n0_mw_hz
        bw[idx] = bw_j
        pl[idx] = loss[idx, col]
        in_cov[idx] = cover[idx, col]

    return LinkTable(
        assoc=assoc,
        horiz=horiz,
        cover=cover,
        gain=gain,
        n_per_dbs=n_per_dbs,
        n_gbs=n_gbs,
        per_ue_power_mw=per_ue_power,
        total_power_mw=total_power,
        r_gbs=r_gbs,
        signal=signal,
        interference_gbs=i_gbs,
        interference_dbs=i_dbs,
        noise=noise,
        bandwidth=bw,
        path_loss_db=pl,
        in_coverage=in_cov,
    )


def placement_table(placement: Placement, scenario: Scenario, config: SystemConfig, **kw) -> LinkTable:
    return link_table(scenario.points, scenario.gbs, placement.site_array, placement.assoc_array, config, **kw)


def dbs_ue_link(
    ue_index: int, serving_dbs_id: int, placement: Placement, scenario: Scenario, config: SystemConfig
) -> LinkBudget:
    """Link of UE `ue_index` when served by DBS `serving_dbs_id` (1-based) under `placement`."""
    if not 1 <= serving_dbs_id <= placement.k:
        raise ValueError(f"no DBS with id {serving_dbs_id}")
    site = placement.dbs[serving_dbs_id - 1]
    x, y = scenario.ues[ue_index]
    if math.hypot(x - site.x, y - site.y) > site.radius_m + COVER_EPS:
        raise ValueError(f"ue {ue_index} outside coverage of DBS {serving_dbs_id}")
    assoc = placement.assoc_array.copy()
    assoc[ue_index] = serving_dbs_id
    return link_table(scenario.points, scenario.gbs, placement.site_array, assoc, config).budget(ue_index)


def gbs_ue_link(ue_index: int, placement: Placement, scenario: Scenario, config: SystemConfig) -> LinkBudget:
    assoc = placement.assoc_array.copy()
    assoc[ue_index] = GBS_TAG
    return link_table(scenario.points, scenario.gbs, placement.site_array, assoc, config).budget(ue_index)


# -------------------------------------------------------------- power report


@dataclass(frozen=True)
class PowerReport:
    per_ue_power_mw: np.ndarray   # required P_{i,j} for DBS-served UEs, NaN elsewhere
    dbs_power_mw: np.ndarray      # (k,) sum of required per-UE powers
    dbs_rate_bps: np.ndarray      # (k,) sum of per-UE rates


def required_power_mw(path_loss_db, interference_mw, bandwidth_hz, rate_bps, n0_mw_hz):
    """Minimum transmit power that delivers `rate_bps` over `bandwidth_hz` given loss and interference."""
    return (
        db_to_linear(np.asarray(path_loss_db))
        * (np.asarray(interference_mw) + bandwidth_hz * n0_mw_hz)
        * (2.0 ** (np.asarray(rate_bps) / bandwidth_hz) - 1.0)
    )


def dbs_power_report(placement: Placement, scenario: Scenario, config: SystemConfig) -> PowerReport:
    t = placement_table(placement, scenario, config)
    k = placement.k
    per_ue = np.full(scenario.n, np.nan)
    on_dbs = t.assoc > 0
    per_ue[on_dbs] = required_power_mw(
        t.path_loss_db[on_dbs],
        t.interference_gbs[on_dbs] + t.interference_dbs[on_dbs],
        t.bandwidth[on_dbs],
        t.rate[on_dbs],
        config.n0_mw_hz,
    )
    cols = t.assoc[on_dbs] - 1
    power = np.bincount(cols, weights=per_ue[on_dbs], minlength=k)[:k]
    rate = np.bincount(cols, weights=t.rate[on_dbs], minlength=k)[:k]
    return PowerReport(per_ue, power, rate)
