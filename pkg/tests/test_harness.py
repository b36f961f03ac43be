import json

import numpy as np
import pytest
from scipy.stats import chisquare

from droneplace.harness import experiments
from droneplace.harness.cli import main
from droneplace.harness.experiments import (
    config_digest,
    parse_vary,
    rebind,
    results_csv,
    run_experiment,
    sweep,
)
from droneplace.harness.scenarios import CrowdSpec, Hotspot, generate_scenario, paper_crowd, uniform_crowd
from droneplace.model import Area, SystemConfig, encode, validate_scenario

CFG = SystemConfig(ignore_backhaul_k_cap=True)


# ------------------------------------------------------------- scenarios


def test_paper_preset_has_500_in_bounds_ues():
    sc = generate_scenario(paper_crowd())
    assert sc.n == 500 and sc.gbs == (100.0, 250.0)
    assert validate_scenario(sc) == []


def test_uniform_preset_passes_chi_square():
    sc = generate_scenario(uniform_crowd(n=10_000, seed=3))
    counts, _, _ = np.histogram2d(sc.points[:, 0], sc.points[:, 1], bins=6, range=[[0, 600], [0, 600]])
    assert chisquare(counts.ravel()).pvalue > 0.01


def test_same_seed_same_points():
    assert generate_scenario(paper_crowd(seed=9)) == generate_scenario(paper_crowd(seed=9))
    assert generate_scenario(paper_crowd(seed=9)) != generate_scenario(paper_crowd(seed=10))


def test_all_zero_weights_rejected():
    spec = CrowdSpec(Area(0, 10, 0, 10), 5, (Hotspot((5, 5), 1.0, 0.0),), 0.0)
    with pytest.raises(ValueError):
        generate_scenario(spec)


def test_hotspot_points_resampled_into_area():
    spec = CrowdSpec(Area(0, 100, 0, 100), 300, (Hotspot((0, 0), 50.0, 1.0),), 0.0, seed=1)
    sc = generate_scenario(spec)
    assert validate_scenario(sc) == []


# ------------------------------------------------------------- experiments


def _small():
    return generate_scenario(paper_crowd(n=120, seed=2))


def test_no_seeds_no_records():
    assert run_experiment(_small(), CFG, "ddp", []) == []


def test_bkm_needs_k():
    with pytest.raises(ValueError, match="k"):
        run_experiment(_small(), CFG, "bkm", [0])


def test_records_rebind_to_their_inputs():
    sc = _small()
    recs = run_experiment(sc, CFG, "eddp", range(3), threads=1)
    assert [r.seed for r in recs] == [0, 1, 2]
    for r in recs:
        assert r.config_digest == config_digest(sc, CFG)
        assert rebind(r, sc, CFG)
        assert not rebind(r, sc, CFG.with_(tau=0.3))


def test_run_errors_are_captured(monkeypatch):
    real = experiments.solve

    def flaky(scenario, config, method, seed, k_override=None, threads=1):
        if seed == 1:
            raise RuntimeError("boom")
        return real(scenario, config, method, seed, k_override, threads)

    monkeypatch.setattr(experiments, "solve", flaky)
    recs = run_experiment(_small(), CFG, "ddp", range(3), threads=1)
    assert [bool(r.error) for r in recs] == [False, True, False]
    assert "boom" in recs[1].error and recs[1].report is None


def test_single_cell_sweep_equals_run_experiment():
    sc = _small()
    table = sweep(lambda n: sc, CFG, "tau", [CFG.tau], ["ddp"], range(2), threads=1)
    direct = run_experiment(sc, CFG, "ddp", range(2), threads=1)
    assert [encode(r.placement) for r in table.select("ddp")] == [encode(r.placement) for r in direct]


def test_bkm_in_sweep_uses_ddp_k():
    sc = _small()
    table = sweep(lambda n: sc, CFG, "tau", [0.4], ["bkm", "ddp"], range(2), threads=1)
    for b, d in zip(table.select("bkm"), table.select("ddp")):
        assert b.k_final == d.k_final


def test_sweep_csv_is_canonical_and_thread_independent():
    family = lambda n: generate_scenario(paper_crowd(n=n or 100, seed=0))  # noqa: E731
    a = results_csv(sweep(family, CFG, "n", [80, 100], ["eddp", "bkm", "ddp"], range(3), threads=1))
    b = results_csv(sweep(family, CFG, "n", [80, 100], ["ddp", "eddp", "bkm"], [2, 0, 1], threads=3))
    assert a == b
    rows = [line.split(",") for line in a.splitlines()[1:]]
    per_run = [r for r in rows if r[3] != "mean"]
    assert per_run == sorted(per_run, key=lambda r: (r[0], float(r[2]), int(r[3])))
    assert sum(r[3] == "mean" for r in rows) == 6


@pytest.mark.parametrize(
    "text, name, values",
    [("tau=0.05:0.7:0.05", "tau", [round(0.05 * i, 10) for i in range(1, 15)]),
     ("n=400:800:100", "n", [400, 500, 600, 700, 800]), ("tau=0.1,0.3", "tau", [0.1, 0.3])],
)
def test_parse_vary(text, name, values):
    assert parse_vary(text) == (name, values)


@pytest.mark.parametrize("text", ["tau", "k=1:2:1", "n=5:1:1", "tau=0:1"])
def test_parse_vary_errors(text):
    with pytest.raises(ValueError):
        parse_vary(text)


# ------------------------------------------------------------- CLI


@pytest.fixture()
def files(tmp_path):
    sc = tmp_path / "sc.json"
    cfg = tmp_path / "cfg.json"
    assert main(["gen", "--preset", "paper", "--n", "120", "--seed", "1", "--out", str(sc)]) == 0
    cfg.write_text(json.dumps({"ignore_backhaul_k_cap": True}))
    return tmp_path, str(sc), str(cfg)


def test_cli_place_and_eval(files):
    tmp, sc, cfg = files
    pl = str(tmp / "p.json")
    assert main(["place", "--scenario", sc, "--config", cfg, "--method", "eddp", "--seed", "2", "--out", pl]) == 0
    rep = str(tmp / "r.json")
    assert main(["eval", "--scenario", sc, "--config", cfg, "--placement", pl, "--out", rep]) == 0
    assert json.loads((tmp / "r.json").read_text())["tau_met"]
    assert main(["eval", "--scenario", sc, "--config", cfg, "--placement", pl, "--fading", "sampled",
                 "--seed", "3", "--out", rep]) in (0, 2)


def test_cli_infeasible_exit_code(files):
    tmp, sc, cfg = files
    (tmp / "hard.json").write_text(json.dumps({"tau": 1.0, "c_min_bps": 5e7, "k_max_cap": 1}))
    code = main(["place", "--scenario", sc, "--config", str(tmp / "hard.json"), "--method", "ddp",
                 "--out", str(tmp / "p.json")])
    assert code == 2


@pytest.mark.parametrize(
    "argv",
    [["place", "--scenario", "missing.json", "--method", "ddp"],
     ["place", "--scenario", "{sc}", "--method", "bkm"],
     ["place", "--scenario", "{sc}", "--config", "{bad}", "--method", "ddp"],
     ["sweep", "--scenario", "{sc}", "--vary", "z=1:2:1"],
     ["sweep", "--scenario", "{sc}", "--vary", "tau=0.1:0.2:0.1", "--methods", "ga"],
     ["gen", "--preset", "nope"]],
)
def test_cli_input_errors(files, argv):
    tmp, sc, _ = files
    (tmp / "bad.json").write_text(json.dumps({"tau": 3}))
    argv = [a.format(sc=sc, bad=str(tmp / "bad.json")) for a in argv]
    assert main(argv) == 1


def test_cli_bounds(files, capsys):
    _, sc, cfg = files
    assert main(["bounds", "--scenario", sc, "--config", cfg]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["k_max"] == 6 and out["partition"] == "split_y"
    assert out["r_g_m"] == pytest.approx(123.637, abs=1e-3)
    assert 42 < out["theta_opt_deg"] < 43


def test_cli_sweep_outputs(files):
    tmp, sc, cfg = files
    out = tmp / "res.csv"
    args = ["sweep", "--scenario", sc, "--config", cfg, "--vary", "n=60:120:60", "--methods", "bkm,ddp,eddp",
            "--seeds", "2", "--out", str(out), "--emit-plotdata"]
    assert main(args) == 0
    first = out.read_bytes()
    assert main(args) == 0
    assert out.read_bytes() == first
    assert (tmp / "res.timing.csv").exists()
    series = {p.name for p in (tmp / "res_plotdata").iterdir()}
    assert {"n_time_ddp.dat", "n_sum_rate_mbps_eddp.dat", "n_k_bkm.dat", "satisfaction_pdf_ddp.dat"} <= series
