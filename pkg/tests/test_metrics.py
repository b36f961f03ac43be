import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import PROPERTY_CASES
from droneplace import channel
from droneplace.ddp import initial_gbs_association
from droneplace.geometry import Circle, circle_overlap_area
from droneplace.harness.scenarios import generate_scenario, paper_crowd
from droneplace.metrics import account, empirical_distribution, evaluate
from droneplace.model import Area, Scenario, SystemConfig, make_placement

CFG = SystemConfig()
AREA = Area(0.0, 600.0, 0.0, 600.0)


def test_empty_placement_far_users():
    sc = Scenario.from_points(AREA, (0.0, 0.0), [(500.0, 500.0), (400.0, 300.0)])
    rep = evaluate(make_placement([], [-1, -1]), sc, CFG)
    assert rep.sum_rate_bps == 0 and rep.satisfaction_rate == 0 and rep.k == 0


def test_gbs_only_paper_scenario_hits_capacity_ceiling():
    sc = generate_scenario(paper_crowd())
    rep = evaluate(make_placement([], initial_gbs_association(sc, CFG)), sc, CFG)
    assert rep.sum_rate_bps <= CFG.c_hat_gbs_bps * (1 + 1e-12)
    assert rep.sum_rate_bps == pytest.approx(70e6, rel=0.05)


def test_evaluation_is_repeatable():
    sc = generate_scenario(paper_crowd(n=120, seed=4))
    p = make_placement([[200, 250, 80, 90], [400, 340, 80, 90]], [0] * 20 + [1] * 50 + [2] * 50)
    assert evaluate(p, sc, CFG) .to_json() == evaluate(p, sc, CFG).to_json()


def test_report_counts_are_consistent():
    sc = generate_scenario(paper_crowd(n=150, seed=1))
    p = make_placement([[200, 250, 80, 90], [400, 340, 80, 90]], [0] * 30 + [1] * 60 + [2] * 60)
    rep = evaluate(p, sc, CFG)
    assert rep.satisfaction_rate == rep.satisfied_count / rep.n
    assert rep.satisfied_count == sum(rep.ue_satisfied)
    assert len(rep.violations) >= sum(1 for a, s in zip(p.association, rep.ue_satisfied) if a >= 0 and not s)


def test_unknown_fading_mode():
    sc = Scenario.from_points(AREA, (0.0, 0.0), [(5.0, 5.0)])
    with pytest.raises(ValueError):
        evaluate(make_placement([], [0]), sc, CFG, fading="lognormal")


def test_sampled_fading_is_reproducible_and_unbiased():
    sc = Scenario.from_points(AREA, (0.0, 0.0), [(60.0, 0.0)])
    p = make_placement([], [0])
    mean_sinr = 10 ** (evaluate(p, sc, CFG).ue_sinr_db[0] / 10)
    assert evaluate(p, sc, CFG, "sampled", 5).to_json() == evaluate(p, sc, CFG, "sampled", 5).to_json()
    draws = [10 ** (evaluate(p, sc, CFG, "sampled", s).ue_sinr_db[0] / 10) for s in range(1000)]
    assert np.mean(draws) == pytest.approx(mean_sinr, rel=0.05)


# ------------------------------------------------------------- distributions


def test_constant_sample_distribution():
    d = empirical_distribution([0.4] * 10, n_bins=5)
    assert np.count_nonzero(d.pdf) == 1 and d.cdf[-1] == 1.0
    assert np.all(np.diff(d.cdf) >= 0)


def test_uniform_grid_distribution():
    d = empirical_distribution(np.linspace(0, 1, 1000, endpoint=False), n_bins=10, range_=(0, 1))
    assert np.allclose(d.pdf, 0.1, atol=1 / 1000)


def test_empty_distribution_rejected():
    with pytest.raises(ValueError):
        empirical_distribution([])


@settings(max_examples=PROPERTY_CASES)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=200), st.integers(1, 50))
def test_distribution_invariants(values, bins):
    d = empirical_distribution(values, n_bins=bins)
    assert d.pdf.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(d.cdf) >= -1e-15) and d.cdf[-1] == 1.0


# ------------------------------------------------------------- properties


coord = st.floats(0, 600, allow_nan=False)


@st.composite
def placements(draw):
    n = draw(st.integers(1, 25))
    k = draw(st.integers(0, 4))
    pts = draw(st.lists(st.tuples(coord, coord), min_size=n, max_size=n))
    sites = draw(st.lists(st.tuples(coord, coord, st.floats(20, 400), st.floats(5, 300)), min_size=k, max_size=k))
    assoc = []
    for x, y in pts:
        choices = [-1, 0] + [j + 1 for j, s in enumerate(sites) if math.hypot(x - s[0], y - s[1]) <= s[3]]
        assoc.append(draw(st.sampled_from(choices)))
    sc = Scenario.from_points(AREA, draw(st.tuples(coord, coord)), pts)
    return sc, make_placement(sites, assoc)


@settings(max_examples=PROPERTY_CASES)
@given(placements())
def test_evaluate_is_pure_and_sums_match(case):
    sc, p = case
    a, b = evaluate(p, sc, CFG), evaluate(p, sc, CFG)
    assert a.to_json() == b.to_json()
    table = channel.placement_table(p, sc, CFG)
    acc = account(table, p.site_array, sc.gbs, CFG)
    assert a.sum_rate_bps == pytest.approx(float(acc.served_rate[acc.sinr_ok].sum()), rel=1e-12, abs=1e-6)
    assert a.satisfaction_rate == a.satisfied_count / sc.n


@settings(max_examples=PROPERTY_CASES)
@given(placements())
def test_overlap_zero_iff_disjoint(case):
    sc, p = case
    rep = evaluate(p, sc, CFG)
    cs = [Circle(d.x, d.y, d.radius_m) for d in p.dbs]
    touching = any(
        math.hypot(a.x - b.x, a.y - b.y) < a.radius + b.radius for i, a in enumerate(cs) for b in cs[i + 1:]
    )
    assert (rep.total_overlap_area_m2 > 0) == touching or (
        touching and all(circle_overlap_area(a, b) < 1e-6 for i, a in enumerate(cs) for b in cs[i + 1:])
    )


@settings(max_examples=PROPERTY_CASES)
@given(placements(), st.data())
def test_degrading_one_ue_never_helps(case, data):
    sc, p = case
    table = channel.placement_table(p, sc, CFG)
    tagged = np.nonzero(table.assoc >= 0)[0]
    if tagged.size == 0:
        return
    i = data.draw(st.sampled_from(tagged.tolist()))
    base = account(table, p.site_array, sc.gbs, CFG)
    signal = table.signal.copy()
    total = table.interference_gbs[i] + table.interference_dbs[i] + table.noise[i]
    signal[i] = min(signal[i], 0.5 * CFG.gamma_th * total)
    worse = account(dataclasses.replace(table, signal=signal), p.site_array, sc.gbs, CFG)
    assert worse.served_rate[worse.sinr_ok].sum() <= base.served_rate[base.sinr_ok].sum() + 1e-6
    assert worse.satisfied.sum() <= base.satisfied.sum()
