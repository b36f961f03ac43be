"""Evaluation of a placement: rates, satisfaction, constraint status, overlap; empirical distributions."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass

import numpy as np

from . import channel
from .geometry import Circle, radius_bounds, total_overlap_area
from .model import GBS_TAG, Placement, Scenario, SystemConfig

RADIUS_TOL = 1e-6


@dataclass(frozen=True)
class Accounting:
    """Per-UE served rate and satisfaction under capacity sharing.

    A cell whose summed Shannon rates exceed its capacity (backhaul for a DBS,
    the GBS cap otherwise) hands each member at most capacity / members.
    """

    served_rate: np.ndarray
    sinr_ok: np.ndarray
    satisfied: np.ndarray
    backhaul_cap: np.ndarray
    backhaul_ok: np.ndarray


def account(table: channel.LinkTable, sites, gbs, config: SystemConfig) -> Accounting:
    sites = np.asarray(sites, dtype=float).reshape(-1, 4)
    k = sites.shape[0]
    assoc = table.assoc
    n = assoc.shape[0]
    if k:
        _, _, cap, ok = channel.backhaul_capacity(sites, gbs, k, config)
        cap = np.where(ok, cap, 0.0)
    else:
        cap, ok = np.zeros(0), np.zeros(0, dtype=bool)

    rate = table.rate
    share = np.full(n, np.nan)
    on_gbs = assoc == GBS_TAG
    if table.n_gbs:
        share[on_gbs] = config.c_hat_gbs_bps / table.n_gbs
    on_dbs = assoc > 0
    if on_dbs.any():
        col = assoc[on_dbs] - 1
        share[on_dbs] = cap[col] / table.n_per_dbs[col]
    served = np.where(assoc >= 0, np.minimum(rate, share), 0.0)
    served = np.nan_to_num(served, nan=0.0)

    with np.errstate(invalid="ignore"):
        sinr_ok = (assoc >= 0) & table.in_coverage & (table.sinr >= config.gamma_th)
    loss_ok = np.ones(n, dtype=bool)
    loss_ok[on_dbs] = table.path_loss_db[on_dbs] <= config.l_allowable_db
    satisfied = sinr_ok & loss_ok & (served >= config.c_min_bps * (1 - 1e-12))
    return Accounting(served, sinr_ok, satisfied, cap, ok)


def placement_accounting(placement: Placement, scenario: Scenario, config: SystemConfig, table=None) -> Accounting:
    if table is None:
        table = channel.placement_table(placement, scenario, config)
    return account(table, placement.site_array, scenario.gbs, config)


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class EvaluationReport:
    n: int
    k: int
    sum_rate_bps: float
    satisfied_count: int
    satisfaction_rate: float
    sinr_ok_count: int
    n_g: int
    n_per_dbs: tuple[int, ...]
    total_overlap_area_m2: float
    dbs_power_mw: tuple[float, ...]
    dbs_rate_bps: tuple[float, ...]
    backhaul_capacity_bps: tuple[float, ...]
    ue_sinr_db: tuple[float, ...]
    ue_rate_bps: tuple[float, ...]
    ue_satisfied: tuple[bool, ...]
    violations: tuple[str, ...]
    tau_met: bool

    CSV_FIELDS = (
        "n", "k", "sum_rate_bps", "satisfied_count", "satisfaction_rate", "sinr_ok_count",
        "n_g", "total_overlap_area_m2", "tau_met", "n_violations",
    )

    def csv_row(self) -> dict:
        row = {f: getattr(self, f) for f in self.CSV_FIELDS if f != "n_violations"}
        row["n_violations"] = len(self.violations)
        return row

    def to_json(self) -> str:
        d = asdict(self)
        d["ue_sinr_db"] = [None if not np.isfinite(v) else v for v in self.ue_sinr_db]
        return json.dumps(d, sort_keys=True, separators=(",", ":"))


def report_csv(reports, extra: list[dict] | None = None) -> str:
    buf = io.StringIO()
    extra = extra or [{} for _ in reports]
    names = list(extra[0].keys()) if extra else []
    w = csv.DictWriter(buf, fieldnames=names + list(EvaluationReport.CSV_FIELDS), lineterminator="\n")
    w.writeheader()
    for r, e in zip(reports, extra):
        w.writerow({**e, **r.csv_row()})
    return buf.getvalue()


def evaluate(
    placement: Placement,
    scenario: Scenario,
    config: SystemConfig,
    fading: str = "mean",
    seed: int | None = None,
) -> EvaluationReport:
    """Recompute every link for `placement` and score it against the sum-rate problem's constraints.

    fading="sampled" draws unit-mean exponential gains for the terrestrial
    signal and the GBS interference term from `seed`.
    """
    if len(placement.association) != scenario.n:
        raise ValueError("association length does not match the number of UEs")
    kw = {}
    if fading == "sampled":
        rng = np.random.default_rng(seed)
        kw = {"gbs_gain": rng.exponential(1.0, scenario.n), "ig_gain": rng.exponential(1.0, scenario.n)}
    elif fading != "mean":
        raise ValueError(f"unknown fading mode {fading!r}")
    table = channel.placement_table(placement, scenario, config, **kw)
    acc = account(table, placement.site_array, scenario.gbs, config)
    assoc = table.assoc
    k = placement.k

    served_mask = acc.sinr_ok
    sum_rate = float(acc.served_rate[served_mask].sum())
    satisfied = int(acc.satisfied.sum())

    power = channel.dbs_power_report(placement, scenario, config) if k else None
    r_min, r_max = radius_bounds(config.env, config) if k else (0.0, 0.0)

    violations = []
    for site in placement.dbs:
        if not config.h_min_m - 1e-9 <= site.altitude_m <= config.h_max_m + 1e-9:
            violations.append(f"dbs {site.id}: altitude {site.altitude_m:.3f} outside bounds")
        if not r_min - RADIUS_TOL <= site.radius_m <= r_max + RADIUS_TOL:
            violations.append(f"dbs {site.id}: radius {site.radius_m:.3f} outside bounds")
    for j in range(k):
        if not acc.backhaul_ok[j] and table.n_per_dbs[j]:
            violations.append(f"dbs {j + 1}: backhaul SNR below threshold")
    tagged = assoc >= 0
    bad = np.nonzero(tagged & ~acc.satisfied)[0]
    for i in bad:
        who = "gbs" if assoc[i] == GBS_TAG else f"dbs {assoc[i]}"
        violations.append(f"ue {i} on {who} unsatisfied")
    if table.n_gbs * config.c_min_bps > config.c_hat_gbs_bps * (1 + 1e-12):
        violations.append("gbs load exceeds its capacity at the minimum rate")
    tau_met = satisfied >= config.tau * scenario.n - 1e-9
    if not tau_met:
        violations.append(f"satisfied {satisfied} below tau*N = {config.tau * scenario.n:g}")

    circles = [Circle(d.x, d.y, d.radius_m) for d in placement.dbs]
    return EvaluationReport(
        n=scenario.n,
        k=k,
        sum_rate_bps=sum_rate,
        satisfied_count=satisfied,
        satisfaction_rate=satisfied / scenario.n,
        sinr_ok_count=int(served_mask.sum()),
        n_g=int(table.n_gbs),
        n_per_dbs=tuple(int(v) for v in table.n_per_dbs),
        total_overlap_area_m2=total_overlap_area(circles),
        dbs_power_mw=tuple(float(v) for v in power.dbs_power_mw) if power else (),
        dbs_rate_bps=tuple(float(v) for v in power.dbs_rate_bps) if power else (),
        backhaul_capacity_bps=tuple(float(v) for v in acc.backhaul_cap),
        ue_sinr_db=tuple(float(v) for v in table.sinr_db),
        ue_rate_bps=tuple(float(v) for v in acc.served_rate),
        ue_satisfied=tuple(bool(v) for v in acc.satisfied),
        violations=tuple(violations),
        tau_met=bool(tau_met),
    )


# --------------------------------------------------------- distributions


@dataclass(frozen=True)
class EmpiricalDistribution:
    values: np.ndarray
    edges: np.ndarray
    pdf: np.ndarray
    cdf: np.ndarray

    def mode(self) -> float:
        i = int(np.argmax(self.pdf))
        return 0.5 * (self.edges[i] + self.edges[i + 1])


def empirical_distribution(values, n_bins: int = 20, range_=None) -> EmpiricalDistribution:
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("empirical distribution of an empty sample")
    counts, edges = np.histogram(v, bins=n_bins, range=range_)
    pdf = counts / counts.sum()
    cdf = np.cumsum(pdf)
    cdf[-1] = 1.0
    return EmpiricalDistribution(v, edges, pdf, cdf)
