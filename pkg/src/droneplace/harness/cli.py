"""Command-line entry point: gen, place, eval, sweep, bounds.

Exit codes: 0 success, 2 infeasible outcome, 1 input error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .. import channel
from ..ddp import initial_gbs_association, k_lower_bound, k_upper_bound
from ..eddp import classify_partition, expected_complexity_reduction
from ..geometry import optimal_elevation_angle
from ..metrics import evaluate
from ..model import (
    GBS_TAG,
    UNSERVED,
    SystemConfig,
    config_from_dict,
    decode_placement,
    encode,
    scenario_from_dict,
    scenario_to_dict,
    validate_config,
    validate_scenario,
)
from .experiments import METHODS, parse_vary, plot_series, results_csv, solve, sweep, timing_csv
from .scenarios import PRESETS, crowd_from_dict, crowd_to_dict, generate_scenario

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2

log = logging.getLogger("droneplace")


class InputError(Exception):
    pass


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(path).write_text(text)


def load_scenario(path: str):
    d = _read_json(path)
    try:
        sc = scenario_from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: malformed scenario ({exc})") from exc
    bad = validate_scenario(sc)
    if bad:
        raise InputError(f"{path}: " + "; ".join(bad[:5]))
    return sc, d.get("crowd")


def load_config(path: str | None) -> SystemConfig:
    if path is None:
        return SystemConfig()
    try:
        cfg = config_from_dict(_read_json(path))
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: malformed config ({exc})") from exc
    bad = validate_config(cfg)
    if bad:
        raise InputError(f"{path}: " + "; ".join(bad))
    return cfg


# ---------------------------------------------------------------- commands


def cmd_gen(args) -> int:
    if args.n < 1:
        raise InputError("--n must be positive")
    spec = PRESETS[args.preset](n=args.n, seed=args.seed)
    sc = generate_scenario(spec)
    d = scenario_to_dict(sc)
    d["crowd"] = crowd_to_dict(spec)
    _write(args.out, json.dumps(d, sort_keys=True, separators=(",", ":")))
    return EXIT_OK


def cmd_place(args) -> int:
    sc, _ = load_scenario(args.scenario)
    cfg = load_config(args.config)
    if args.method == "bkm" and args.k is None:
        raise InputError("method bkm needs a predefined DBS count: pass --k")
    if args.k is not None and args.k < 0:
        raise InputError("--k must be non-negative")
    out = solve(sc, cfg, args.method, args.seed, args.k, threads=None)
    _write(args.out, encode(out.placement))
    log.info("k=%d satisfied=%d/%d feasible=%s %s", out.k, out.satisfied_count, sc.n, out.feasible, out.reason)
    return EXIT_OK if out.feasible else EXIT_INFEASIBLE


def cmd_eval(args) -> int:
    sc, _ = load_scenario(args.scenario)
    cfg = load_config(args.config)
    try:
        placement = decode_placement(Path(args.placement).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {args.placement}: {exc.strerror}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{args.placement}: malformed placement ({exc})") from exc
    if len(placement.association) != sc.n:
        raise InputError("placement association length does not match the scenario")
    if any(a < UNSERVED or a > placement.k for a in placement.association):
        raise InputError("placement association refers to a DBS that does not exist")
    report = evaluate(placement, sc, cfg, fading=args.fading, seed=args.seed)
    _write(args.out, report.to_json())
    return EXIT_OK if report.tau_met else EXIT_INFEASIBLE


def _family(scenario, crowd):
    def family(n):
        if n is None or n == scenario.n:
            return scenario
        if crowd is not None:
            spec = crowd_from_dict(crowd)
            return generate_scenario(type(spec)(spec.area, n, spec.hotspots, spec.uniform_weight, spec.seed, spec.gbs))
        if n > scenario.n:
            raise InputError(f"scenario has {scenario.n} UEs and no crowd spec to draw {n}")
        return type(scenario)(scenario.area, scenario.gbs, scenario.ues[:n])

    return family


def cmd_sweep(args) -> int:
    sc, crowd = load_scenario(args.scenario)
    cfg = load_config(args.config)
    try:
        vary, values = parse_vary(args.vary)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = set(methods) - set(METHODS)
    if unknown or not methods:
        raise InputError(f"unknown methods {sorted(unknown)}; choose from {','.join(METHODS)}")
    if vary == "tau" and any(not 0 <= v <= 1 for v in values):
        raise InputError("tau values must lie in [0, 1]")
    if args.seeds < 0:
        raise InputError("--seeds must be non-negative")
    seeds = range(args.seed0, args.seed0 + args.seeds)
    table = sweep(_family(sc, crowd), cfg, vary, values, methods, seeds, bkm_k=args.k)
    _write(args.out, results_csv(table))
    if args.out and args.out != "-":
        out = Path(args.out)
        out.with_name(out.stem + ".timing.csv").write_text(timing_csv(table))
        if args.emit_plotdata:
            pdir = out.with_name(out.stem + "_plotdata")
            pdir.mkdir(exist_ok=True)
            for stem, text in plot_series(table).items():
                (pdir / f"{stem}.dat").write_text(text)
    return EXIT_OK


def cmd_bounds(args) -> int:
    sc, _ = load_scenario(args.scenario)
    cfg = load_config(args.config)
    base = initial_gbs_association(sc, cfg)
    n_g = int((base == GBS_TAG).sum())
    r_g = channel.gbs_coverage_radius(cfg)
    reduction, valid = expected_complexity_reduction(sc.area, r_g)
    out = {
        "n": sc.n,
        "n_g": n_g,
        "k_min": k_lower_bound(sc.n - n_g, cfg),
        "k_max": k_upper_bound(cfg),
        "r_g_m": r_g,
        "theta_opt_deg": math.degrees(optimal_elevation_angle(cfg.env)),
        "partition": classify_partition(sc.area, sc.gbs, r_g).kind.value,
        "complexity_reduction": reduction,
        "complexity_reduction_valid": valid,
    }
    _write(args.out, json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="droneplace", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a crowd scenario")
    g.add_argument("--preset", choices=sorted(PRESETS), default="paper")
    g.add_argument("--n", type=int, default=500)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    def common(q):
        q.add_argument("--scenario", required=True)
        q.add_argument("--config", help="JSON config; missing fields take the default values")

    pl = sub.add_parser("place", help="compute a placement")
    common(pl)
    pl.add_argument("--method", choices=METHODS, required=True)
    pl.add_argument("--k", type=int, help="fixed DBS count (required for bkm)")
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--out")
    pl.set_defaults(func=cmd_place)

    e = sub.add_parser("eval", help="evaluate a stored placement")
    common(e)
    e.add_argument("--placement", required=True)
    e.add_argument("--fading", choices=("mean", "sampled"), default="mean")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="run methods over a tau or n grid and many seeds")
    common(s)
    s.add_argument("--vary", required=True, help="tau=START:STOP:STEP or n=START:STOP:STEP")
    s.add_argument("--methods", default=",".join(METHODS))
    s.add_argument("--seeds", type=int, default=100, help="number of seeds")
    s.add_argument("--seed0", type=int, default=0, help="first seed")
    s.add_argument("--k", type=int, help="fixed DBS count for bkm (default: DDP's k per run)")
    s.add_argument("--out")
    s.add_argument("--emit-plotdata", action="store_true", help="write x/y series next to the CSV")
    s.set_defaults(func=cmd_sweep)

    b = sub.add_parser("bounds", help="print N_G, k bounds, r_G, optimal elevation and partition saving")
    common(b)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bounds)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
