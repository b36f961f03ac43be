import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import PROPERTY_CASES
from droneplace import channel
from droneplace.ddp import run_ddp
from droneplace.eddp import (
    PartitionKind,
    classify_partition,
    empirical_partition_frequencies,
    expected_complexity_reduction,
    partition_probabilities,
    region_index,
    run_eddp,
    split_k,
)
from droneplace.metrics import evaluate
from droneplace.model import Area, Scenario, SystemConfig, encode

CFG = SystemConfig(ignore_backhaul_k_cap=True)
AREA = Area(0.0, 600.0, 0.0, 600.0)
R_G = channel.gbs_coverage_radius(CFG)


@pytest.mark.parametrize(
    "gbs, r_g, kind",
    [((300, 300), 124, PartitionKind.QUAD), ((100, 250), R_G, PartitionKind.SPLIT_Y), ((50, 50), 124, PartitionKind.NONE),
     ((250, 100), R_G, PartitionKind.SPLIT_X)],
)
def test_partition_rules(gbs, r_g, kind):
    assert classify_partition(AREA, gbs, r_g).kind is kind


def test_paper_gbs_splits_at_its_y():
    plan = classify_partition(AREA, (100, 250), R_G)
    assert plan.y_line == 250 and plan.x_line is None
    assert plan.areas == (Area(0, 600, 0, 250), Area(0, 600, 250, 600))


def test_gbs_outside_area_rejected():
    with pytest.raises(ValueError):
        classify_partition(AREA, (700, 10), R_G)


def test_points_on_lines_go_low():
    plan = classify_partition(AREA, (300, 300), 100)
    idx = region_index(np.array([[300.0, 300.0], [300.1, 300.0], [300.0, 300.1], [301, 301]]), plan)
    assert idx.tolist() == [0, 1, 2, 3]


def test_complexity_reduction_spot_value():
    value, valid = expected_complexity_reduction(AREA, 123.6)
    assert valid and value == pytest.approx(1 - 2330.4**2 / (64 * 360000), abs=1e-12)
    assert value == pytest.approx(0.764, abs=1e-3)


def test_complexity_reduction_limits():
    assert expected_complexity_reduction(AREA, 1e-12)[0] == pytest.approx(1 - 1 / 64)
    assert expected_complexity_reduction(AREA, 300.0) == (0.0, False)


def test_partition_probabilities_spot_values():
    p1, p2, p4 = partition_probabilities(AREA, 123.6)
    # direct evaluation: 4r^2/A, 2r(2L - 4r)/A, (L - 2r)^2/A with L = 600, r = 123.6
    assert (p1, p2, p4) == pytest.approx((0.169744, 0.484512, 0.345744), abs=1e-9)
    assert p1 + p2 + p4 == pytest.approx(1.0, abs=1e-12)
    assert partition_probabilities(AREA, 1e-12) == pytest.approx((0, 0, 1))
    assert partition_probabilities(Area(0, 200, 0, 200), 100.0)[2] == 0.0


def test_partition_probabilities_match_monte_carlo():
    got = empirical_partition_frequencies(AREA, R_G, n=10_000, seed=1)
    for a, b in zip(got, partition_probabilities(AREA, R_G)):
        assert abs(a - b) <= 0.02


def test_split_k_by_load():
    assert split_k(10, [100, 300]) == [3, 7]
    assert split_k(3, [0, 5, 5, 5]) == [0, 1, 1, 1]
    assert split_k(1, [2, 9]) == [0, 1]
    assert sum(split_k(7, [3, 3, 3])) == 7


def test_one_occupied_region_matches_ddp_there():
    rng = np.random.default_rng(0)
    pts = rng.uniform(350, 590, (60, 2))
    sc = Scenario.from_points(AREA, (300.0, 300.0), pts)
    out = run_eddp(sc, CFG, seed=3, threads=1)
    assert [r.k for r in out.regions if r.n == 0] == [0, 0, 0]
    sub = Scenario.from_points(Area(300, 600, 300, 600), (300.0, 300.0), pts)
    ref = run_ddp(sub, CFG, seed=next(iter(_region_seed(3, 3))))
    assert out.k == ref.k


def _region_seed(seed, region):
    from droneplace.ddp import derive_seed

    yield derive_seed(seed, region)


def test_far_regions_start_without_gbs_users():
    rng = np.random.default_rng(2)
    pts = np.vstack([rng.uniform(280, 299, (30, 2)), rng.uniform(301, 320, (30, 2))])
    sc = Scenario.from_points(AREA, (300.0, 300.0), pts)
    out = run_eddp(sc, CFG.with_(tau=0.0), seed=0, threads=1)
    upper = region_index(pts, classify_partition(AREA, (300, 300), R_G)) == 3
    assert not np.any(np.array(out.placement.association)[upper] == 0)


def _regions_scenario(seed, n):
    rng = np.random.default_rng(seed)
    gbs = tuple(rng.uniform(130, 470, 2))
    return Scenario.from_points(AREA, gbs, rng.uniform(0, 600, (n, 2)))


def test_thread_count_does_not_change_result():
    sc = _regions_scenario(9, 200)
    a = run_eddp(sc, CFG, seed=5, threads=1)
    b = run_eddp(sc, CFG, seed=5, threads=4)
    assert encode(a.placement) == encode(b.placement)


@settings(max_examples=PROPERTY_CASES)
@given(st.floats(0, 600), st.floats(0, 600), st.floats(1, 400),
       st.lists(st.tuples(st.floats(0, 600), st.floats(0, 600)), min_size=1, max_size=50))
def test_regions_tile_the_area(xg, yg, r_g, pts):
    plan = classify_partition(AREA, (xg, yg), r_g)
    assert len(plan.areas) == {"none": 1, "split_x": 2, "split_y": 2, "quad": 4}[plan.kind.value]
    assert sum(a.width * a.height for a in plan.areas) == pytest.approx(AREA.width * AREA.height)
    idx = region_index(np.array(pts), plan)
    assert idx.min() >= 0 and idx.max() < len(plan.areas)
    for (x, y), r in zip(pts, idx):
        assert plan.areas[r].contains(x, y)


@st.composite
def eddp_runs(draw):
    seed = draw(st.integers(0, 2**31))
    n = draw(st.integers(1, 30))
    sc = _regions_scenario(seed, n)
    cfg = CFG.with_(tau=draw(st.sampled_from([0.0, 0.3, 0.6])))
    k = draw(st.one_of(st.none(), st.integers(1, 6)))
    return sc, cfg, seed, k


@settings(max_examples=PROPERTY_CASES)
@given(eddp_runs())
def test_merge_is_sound_and_deterministic(run):
    sc, cfg, seed, k = run
    out = run_eddp(sc, cfg, seed=seed, k_override=k, threads=1)
    p = out.placement
    # cached per-UE SINR equals a fresh computation on the merged placement
    fresh = np.array(evaluate(p, sc, cfg).ue_sinr_db)
    cached = np.array(p.sinr_db)
    assert np.array_equal(np.isnan(fresh), np.isnan(cached))
    ok = ~np.isnan(fresh)
    assert np.allclose(fresh[ok], cached[ok], rtol=0, atol=1e-9)
    for i in np.nonzero(np.array(p.association) > 0)[0][:5]:
        link = channel.dbs_ue_link(int(i), p.association[i], p, sc, cfg)
        assert link.sinr_db == pytest.approx(cached[i], abs=1e-9)
    if k is not None:
        assert p.k <= k
    again = run_eddp(sc, cfg, seed=seed, k_override=k, threads=1)
    assert encode(again.placement) == encode(p)
