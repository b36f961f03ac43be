"""Seeded experiment runs and method x cell x seed sweeps with canonical CSV output."""
from __future__ import annotations

import csv
import hashlib
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..ddp import DdpOutcome, run_ddp
from ..eddp import run_eddp
from ..metrics import EvaluationReport, empirical_distribution, evaluate
from ..model import Placement, Scenario, SystemConfig, encode

METHODS = ("bkm", "ddp", "eddp")


def config_digest(scenario: Scenario, config: SystemConfig) -> str:
    h = hashlib.sha256()
    h.update(encode(config).encode())
    h.update(b"\0")
    h.update(encode(scenario).encode())
    return h.hexdigest()[:16]


def pool_size() -> int:
    try:
        return max(1, int(os.environ.get("DRONEPLACE_THREADS", "4")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class RunRecord:
    method: str
    seed: int
    config_digest: str
    k_final: int
    wall_time_s: float
    report: EvaluationReport | None
    placement: Placement | None = None
    feasible: bool = False
    error: str = ""


def solve(scenario: Scenario, config: SystemConfig, method: str, seed: int,
          k_override: int | None = None, threads: int | None = 1) -> DdpOutcome:
    """Dispatch one placement run by method name."""
    if method == "bkm":
        if k_override is None:
            raise ValueError("method bkm needs a predefined DBS count; supply k_override (--k)")
        return run_ddp(scenario, config, seed=seed, k_override=k_override, refine=False)
    if method == "ddp":
        return run_ddp(scenario, config, seed=seed, k_override=k_override)
    if method == "eddp":
        return run_eddp(scenario, config, seed=seed, k_override=k_override, threads=threads)
    raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")


def run_once(scenario, config, method, seed, k_override=None, digest=None) -> RunRecord:
    digest = digest or config_digest(scenario, config)
    try:
        out = solve(scenario, config, method, seed, k_override)
    except Exception as exc:  # recorded, the batch goes on
        return RunRecord(method, seed, digest, -1, 0.0, None, error=f"{type(exc).__name__}: {exc}")
    report = evaluate(out.placement, scenario, config)
    return RunRecord(method, seed, digest, out.k, out.wall_time_s, report, out.placement, out.feasible)


def run_experiment(scenario: Scenario, config: SystemConfig, method: str, seeds,
                   k_override: int | None = None, threads: int | None = None) -> list[RunRecord]:
    """One record per seed, in seed order. bkm requires `k_override`."""
    seeds = list(seeds)
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    if method == "bkm" and k_override is None:
        raise ValueError("method bkm needs a predefined DBS count; supply k_override (--k)")
    if not seeds:
        return []
    digest = config_digest(scenario, config)
    n = threads or pool_size()

    def task(s):
        return run_once(scenario, config, method, s, k_override, digest)

    if n > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            return list(pool.map(task, seeds))
    return [task(s) for s in seeds]


# ------------------------------------------------------------------- sweep


def parse_vary(text: str) -> tuple[str, list]:
    """'tau=0.05:0.7:0.05' or 'n=400:800:100' (inclusive stop) or a comma list 'tau=0.1,0.2'."""
    if "=" not in text:
        raise ValueError(f"--vary expects name=start:stop:step, got {text!r}")
    name, spec = text.split("=", 1)
    name = name.strip().lower()
    if name not in ("tau", "n"):
        raise ValueError(f"can only vary tau or n, got {name!r}")
    cast = int if name == "n" else float
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be start:stop:step, got {spec!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"empty or invalid range {spec!r}")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        values = [cast(round(start + i * step, 10)) for i in range(count)]
    else:
        values = [cast(v) for v in spec.split(",") if v.strip()]
    if not values:
        raise ValueError("no values to sweep")
    return name, values


@dataclass(frozen=True)
class SweepTable:
    vary: str
    records: tuple[tuple[float, RunRecord], ...]  # (cell value, record), canonical order

    def cells(self) -> list:
        return sorted({c for c, _ in self.records})

    def select(self, method: str, cell=None) -> list[RunRecord]:
        return [r for c, r in self.records if r.method == method and (cell is None or c == cell)]

    def mean(self, method: str, cell, field: str) -> float:
        vals = [_field(r, field) for r in self.select(method, cell) if r.report is not None]
        return float(np.mean(vals)) if vals else float("nan")


def _field(rec: RunRecord, field: str) -> float:
    if field == "k_final":
        return float(rec.k_final)
    if field == "wall_time_s":
        return rec.wall_time_s
    return float(getattr(rec.report, field))


def sweep(family, config: SystemConfig, vary: str, values, methods, seeds,
          bkm_k: int | None = None, threads: int | None = None) -> SweepTable:
    """Run every (method, cell, seed).

    `family(n)` returns the scenario for UE count n (called with None when tau
    is varied). bkm takes `bkm_k` if given, otherwise the DBS count DDP chose
    for the same cell and seed.
    """
    methods = [m for m in METHODS if m in set(methods)]
    if not methods:
        raise ValueError("no known methods requested")
    seeds = sorted(set(int(s) for s in seeds))
    cells = []
    for v in values:
        if vary == "tau":
            cells.append((v, family(None), config.with_(tau=float(v))))
        elif vary == "n":
            cells.append((v, family(int(v)), config))
        else:
            raise ValueError(f"can only vary tau or n, got {vary!r}")

    need_ddp = "ddp" in methods or ("bkm" in methods and bkm_k is None)
    first = [m for m in ("ddp", "eddp") if m in methods or (m == "ddp" and need_ddp)]
    tasks = [(m, ci, s) for m in first for ci in range(len(cells)) for s in seeds]
    n_threads = threads or pool_size()

    def run(task, k=None):
        m, ci, s = task
        _, sc, cfg = cells[ci]
        return task, run_once(sc, cfg, m, s, k)

    def pmap(fn, items):
        if n_threads > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=n_threads) as pool:
                return list(pool.map(fn, items))
        return [fn(t) for t in items]

    done = dict(pmap(run, tasks))
    if "bkm" in methods:
        def run_bkm(task):
            _, ci, s = task
            k = bkm_k if bkm_k is not None else done[("ddp", ci, s)].k_final
            if k < 0:
                return task, RunRecord("bkm", s, done[("ddp", ci, s)].config_digest, -1, 0.0, None,
                                       error="no reference k: the ddp run failed")
            return run(task, k)

        done.update(pmap(run_bkm, [("bkm", ci, s) for ci in range(len(cells)) for s in seeds]))
    rows = sorted(
        ((cells[ci][0], rec) for (m, ci, s), rec in done.items() if m in methods),
        key=lambda cr: (cr[1].method, cr[0], cr[1].seed),
    )
    return SweepTable(vary, tuple(rows))


# ------------------------------------------------------------------ output

_REPORT_FIELDS = EvaluationReport.CSV_FIELDS
RESULT_FIELDS = ("method", "vary", "cell", "seed", "k_final", "feasible", "config_digest", "error") + _REPORT_FIELDS
MEAN_FIELDS = ("k_final",) + tuple(
    f for f in _REPORT_FIELDS if f not in ("n", "tau_met", "n_violations")
)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if np.isfinite(v) else "nan"
    return str(v)


def results_csv(table: SweepTable) -> str:
    """Per-run rows then per-(method, cell) mean rows; deterministic bytes, no timings."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_FIELDS)
    for cell, r in table.records:
        head = [r.method, table.vary, _fmt(cell), r.seed, r.k_final, _fmt(r.feasible), r.config_digest, r.error]
        if r.report is None:
            tail = [""] * len(_REPORT_FIELDS)
        else:
            row = r.report.csv_row()
            tail = [_fmt(row[f]) for f in _REPORT_FIELDS]
        w.writerow(head + tail)
    for method in sorted({r.method for _, r in table.records}):
        for cell in table.cells():
            recs = [r for r in table.select(method, cell) if r.report is not None]
            if not recs:
                continue
            means = {f: table.mean(method, cell, f) for f in MEAN_FIELDS}
            head = [method, table.vary, _fmt(cell), "mean", _fmt(means["k_final"]),
                    _fmt(float(np.mean([r.feasible for r in recs]))), recs[0].config_digest, ""]
            tail = [_fmt(means[f]) if f in means else "" for f in _REPORT_FIELDS]
            w.writerow(head + tail)
    return buf.getvalue()


def timing_csv(table: SweepTable) -> str:
    """Solver wall times per run plus per-cell means (kept apart because they are not reproducible)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("method", "vary", "cell", "seed", "wall_time_s"))
    for cell, r in table.records:
        w.writerow((r.method, table.vary, _fmt(cell), r.seed, f"{r.wall_time_s:.6f}"))
    for method in sorted({r.method for _, r in table.records}):
        for cell in table.cells():
            w.writerow((method, table.vary, _fmt(cell), "mean", f"{table.mean(method, cell, 'wall_time_s'):.6f}"))
    return buf.getvalue()


PLOT_SERIES = {
    "time": "wall_time_s",
    "k": "k_final",
    "sum_rate_mbps": "sum_rate_bps",
    "satisfaction": "satisfaction_rate",
}


def plot_series(table: SweepTable) -> dict[str, str]:
    """x/y text series keyed by file stem: one per (metric, method), plus satisfaction pdfs."""
    out = {}
    for method in sorted({r.method for _, r in table.records}):
        for name, field in PLOT_SERIES.items():
            lines = [f"# x={table.vary} y={name} method={method}"]
            for cell in table.cells():
                y = table.mean(method, cell, field)
                if field == "sum_rate_bps":
                    y /= 1e6
                lines.append(f"{_fmt(cell)} {_fmt(y)}")
            out[f"{table.vary}_{name}_{method}"] = "\n".join(lines) + "\n"
        sat = [r.report.satisfaction_rate for r in table.select(method, table.cells()[0]) if r.report]
        if sat:
            d = empirical_distribution(sat, n_bins=20, range_=(0.0, 1.0))
            lines = [f"# x=satisfaction y=pdf method={method} {table.vary}={_fmt(table.cells()[0])}"]
            for lo, hi, p in zip(d.edges[:-1], d.edges[1:], d.pdf):
                lines.append(f"{_fmt(0.5 * (lo + hi))} {_fmt(p)}")
            out[f"satisfaction_pdf_{method}"] = "\n".join(lines) + "\n"
    return out


def rebind(record: RunRecord, scenario: Scenario, config: SystemConfig) -> bool:
    """True when the record's stored report equals a fresh evaluation of its placement."""
    if record.placement is None or record.report is None:
        return False
    if record.config_digest != config_digest(scenario, config):
        return False
    return evaluate(record.placement, scenario, config).to_json() == record.report.to_json()
