from __future__ import annotations

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from bisgsamp import design
from bisgsamp.ingest import GeoPrior


def _prior(p, q=None):
    L = len(p)
    q = np.full(L, 1.0 / L) if q is None else np.asarray(q, float) / np.sum(q)
    return GeoPrior(tuple(f"g{i}" for i in range(L)), np.asarray(p, float), q)


def _cells(groups, p_true=None, keep=None, n_units=None):
    """groups: list per stratum of (weight, p_hat) pairs."""
    g, w, p = [], [], []
    for gi, cells in enumerate(groups):
        for wt, ph in cells:
            g.append(gi)
            w.append(wt)
            p.append(ph)
    L = len(groups)
    g = np.array(g)
    w = np.array(w, float)
    tot = np.bincount(g, w, L)
    return design.FrameCells(
        tuple(f"g{i}" for i in range(L)), g, w, np.array(p), tot if n_units is None else n_units, tot, p_true, keep
    )


# --- rounding -----------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.01, 100), min_size=1, max_size=8), st.integers(1, 500))
def test_largest_remainder_sums_and_stays_adjacent(w, n):
    w = np.array(w)
    real = n * w / w.sum()
    out = design.largest_remainder(real, n)
    assert out.sum() == n
    assert np.all(out >= np.floor(real)) and np.all(out <= np.ceil(real))


# --- stratified ---------------------------------------------------------------


def test_stratified_example():
    cells = _cells([[(100, 0.04)], [(100, 0.01)]])
    alloc = design.stratified_allocation(_prior([0.04, 0.01]), cells, 30)
    np.testing.assert_array_equal(alloc.targets, [20, 10])


def test_stratified_single_and_symmetric():
    cells = _cells([[(500, 0.1)]])
    assert design.stratified_allocation(_prior([0.1]), cells, 37).targets.tolist() == [37]
    cells = _cells([[(100, 0.1)], [(100, 0.1)], [(100, 0.1)]])
    assert design.stratified_allocation(_prior([0.1] * 3), cells, 30).targets.tolist() == [10, 10, 10]


def test_stratified_filtered_uses_best_case_rate():
    # N = 100, p = 0.04, N* = 25: best-case rate 0.16, weight sqrt(.16) * 25 = 10 = sqrt(.04) * 100 / 2
    w = design.stratified_weights(np.array([0.04]), np.array([100.0]), np.array([25.0]))
    assert w[0] == pytest.approx(10.0)


# --- Poisson ------------------------------------------------------------------


def test_success_rate_example_and_invariances():
    cells = _cells([[(100, 0.9), (100, 0.1)]])
    assert design.success_rate(cells, 0) == pytest.approx(0.82)
    doubled = _cells([[(200, 0.9), (200, 0.1)]])
    assert design.success_rate(doubled, 0) == pytest.approx(0.82)
    flat = _cells([[(50, 0.3), (70, 0.3)]])
    assert design.success_rate(flat, 0) == pytest.approx(0.3)


def test_success_rate_independent_of_target():
    cells = _cells([[(100, 0.9), (100, 0.1)]])
    for n in (5, 50):
        pi = design.inclusion_probabilities(cells, np.array([n])).pi
        mom = design.poisson_moments(cells, pi)
        assert mom["E_n1"] / mom["E_n"] == pytest.approx(0.82)


def test_poisson_allocation_equal_weight_example():
    # success rates (0.64, 0.04); Pr(G|R=1) = (0.8, 0.2): weights 0.8/0.8 = 0.2/0.2
    cells = _cells([[(100, 0.64)], [(100, 0.04)]])
    w = design.poisson_weights(cells, _prior([0.1, 0.1], [0.8, 0.2]), filtered=False)
    np.testing.assert_allclose(w, [1.0, 1.0])
    alloc = design.poisson_allocation(cells, _prior([0.1, 0.1], [0.8, 0.2]), 20, filtered=False, cap=False)
    np.testing.assert_array_equal(alloc.targets, [10, 10])


def test_poisson_single_stratum():
    cells = _cells([[(100, 0.5), (50, 0.2)]])
    assert design.poisson_allocation(cells, _prior([0.1]), 30).targets.tolist() == [30]


def test_poisson_matches_stratified_when_rates_proportional():
    N = np.array([300.0, 500.0, 200.0])
    p = np.array([0.02, 0.05, 0.1])
    c = 0.5
    # homogeneous p_hat per stratum, so the success rate is p / c
    cells = _cells([[(N[k], p[k] / c)] for k in range(3)])
    prior = _prior(p, N * p)
    pois = design.poisson_allocation(cells, prior, 100, filtered=False, cap=False)
    strat = design.stratified_allocation(prior, cells, 100)
    np.testing.assert_allclose(pois.targets_real, strat.targets_real, rtol=1e-12)


def test_poisson_filtered_weights():
    cells = _cells([[(10, 0.5), (10, 0.1)], [(20, 0.2)]])
    w = design.poisson_weights(cells, _prior([0.1, 0.1]), filtered=True)
    pi_star = np.array([6.0, 4.0])
    sq = np.array([10 * 0.25 + 10 * 0.01, 20 * 0.04])
    np.testing.assert_allclose(w, pi_star**1.5 / np.sqrt(sq))


def test_replication_flag_changes_weights_and_is_off_by_default():
    cells = _cells([[(10, 0.5), (10, 0.1)], [(20, 0.2)]])
    prior = _prior([0.3, 0.05])
    bug = design.poisson_weights(cells, prior, filtered=True, replication_bug=True)
    np.testing.assert_allclose(bug, np.sqrt(prior.p_r_given_g * np.array([6.0, 4.0])))
    default = design.poisson_allocation(cells, prior, 10)
    explicit = design.poisson_allocation(cells, prior, 10, replication_bug=False)
    np.testing.assert_array_equal(default.targets, explicit.targets)


def test_all_zero_stratum_raises_unless_skipped():
    cells = _cells([[(10, 0.5)], [(10, 0.0)]])
    with pytest.raises(design.DesignError, match="g1"):
        design.poisson_weights(cells, _prior([0.1, 0.1]), filtered=False)
    w = design.poisson_weights(cells, _prior([0.1, 0.1]), filtered=False, skip_empty=True)
    assert w[1] == 0.0


def test_cap_clips_and_redistributes():
    # stratum 0 can hold at most pi(g)/max p = (0.5 + 0.1)/0.5 = 1.2 units
    cells = _cells([[(1, 0.5), (1, 0.1)], [(100, 0.1)]])
    alloc = design.poisson_allocation(cells, _prior([0.1, 0.1], [0.9, 0.1]), 10, filtered=False)
    assert alloc.capped == ["g0"]
    assert alloc.targets_real[0] == pytest.approx(1.2)
    assert alloc.targets.sum() == 10
    assert alloc.targets[0] <= 1


@pytest.mark.parametrize("L", [3, 4])
def test_allocations_match_grid_search(L):
    rng = np.random.default_rng(L)
    n, step = 100, 1
    for _ in range(5):
        N = rng.integers(100, 2000, L).astype(float)
        p = rng.uniform(0.005, 0.2, L)
        w = design.stratified_weights(p, N)
        real = n * w / w.sum()
        A = p * N**2
        best = oracles.grid_argmin(lambda a: (A / a).sum(axis=1), n, L, step)
        assert np.max(np.abs(real - best)) <= step

        q = rng.dirichlet(np.ones(L))
        rate = rng.uniform(0.05, 0.9, L)
        cells = _cells([[(N[k], rate[k])] for k in range(L)])
        alloc = design.poisson_allocation(cells, _prior(p, q), n, filtered=False, cap=False)
        B = q**2 / rate
        best = oracles.grid_argmin(lambda a: (B / a).sum(axis=1), n, L, step)
        assert np.max(np.abs(alloc.targets_real - best)) <= step


# --- inclusion probabilities --------------------------------------------------


def test_uniform_and_hand_examples():
    cells = _cells([[(1, 0.3)] * 8])
    pi = design.inclusion_probabilities(cells, np.array([2])).pi
    np.testing.assert_allclose(pi, 2 / 8)
    cells = _cells([[(1, 0.9), (1, 0.1)]])
    np.testing.assert_allclose(design.inclusion_probabilities(cells, np.array([1])).pi, [0.9, 0.1])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=30), st.floats(0.05, 0.95))
def test_capping_preserves_stratum_total(p, frac):
    p = np.array(p)
    if not np.any(p > 0):
        p[0] = 0.5
    cells = _cells([[(1, x) for x in p]])
    n_pos = int((p > 0).sum())
    target = max(frac * n_pos, 1e-3)
    res = design.inclusion_probabilities(cells, np.array([target]))
    assert np.all(res.pi <= 1.0 + 1e-12)
    assert np.all(res.pi >= 0.0)
    assert res.pi.sum() == pytest.approx(target, abs=1e-9)
    assert np.all(res.pi[p == 0] == 0)


def test_capping_survives_subnormal_probabilities():
    cells = _cells([[(1, 0.0), (1, 5e-324)]])
    pi = design.inclusion_probabilities(cells, np.array([0.5])).pi
    np.testing.assert_array_equal(pi, [0.0, 0.5])


def test_zero_normalizer_with_target_raises():
    cells = _cells([[(5, 0.0)]])
    with pytest.raises(design.DesignError, match="pi\\(g\\)=0"):
        design.inclusion_probabilities(cells, np.array([1]))


# --- moments and yields -------------------------------------------------------


def test_moment_hand_values():
    cells = _cells([[(1, 0.9), (1, 0.1)]])
    mom = design.poisson_moments(cells, np.array([0.9, 0.1]))
    assert mom["Var_n_g"][0] == pytest.approx(0.18)
    assert mom["E_n1_g"][0] == pytest.approx(0.82)
    assert mom["Var_n1_g"][0] == pytest.approx(0.82 - 0.6562)
    degenerate = design.poisson_moments(cells, np.array([1.0, 0.0]))
    assert degenerate["Var_n"] == 0.0


def test_srs_yield_hand_value():
    prior = _prior([0.02])
    y, v = design.srs_yield(prior, np.array([1000.0]), 100)
    assert y == pytest.approx(0.02)
    assert v == pytest.approx((1 / 100) * 0.02 * 0.98 * (900 / 999), rel=1e-12)


def test_sensitivity_adds_filtered_units():
    cells = _cells([[(50, 0.4), (50, 0.2)]], n_units=np.array([200.0]))
    plan = design.make_plan("poisson", cells, _prior([0.1]), 20)
    base = plan.diagnostics
    sens = design.plan_diagnostics(plan, cells, _prior([0.1]), epsilon=0.01, delta=0.05)["sensitivity"]
    # filtered units now absorb some of the target, and their true rate exceeds epsilon
    sc = design.sensitivity_cells(cells, 0.01, 0.05)
    assert sc.weight[-1] == 100
    pi = design.inclusion_probabilities(sc, plan.targets).pi
    assert sens["E_n1"] == pytest.approx(float(np.sum(sc.weight * pi * sc.truth)))
    assert sens["yield"] != base["yield"]


def test_plan_round_trip_and_methods():
    cells = _cells([[(100, 0.3), (100, 0.05)], [(300, 0.1)]])
    prior = _prior([0.1, 0.05])
    out = design.compare_methods(cells, prior, 40)
    assert set(out) == set(design.METHODS)
    plan = design.make_plan("poisson", cells, prior, 40)
    back = design.SamplingPlan.from_dict(plan.to_dict())
    np.testing.assert_array_equal(back.targets, plan.targets)
    assert back.method == "poisson"
    with pytest.raises(ValueError, match="unknown method"):
        design.make_plan("cluster", cells, prior, 40)


# --- drawing ------------------------------------------------------------------


def _pi_table(pi):
    return pd.DataFrame({"unit_id": [f"u{k:03d}" for k in range(len(pi))], "stratum": "g0", "pi": pi})


def test_draw_boundaries_and_determinism():
    t = _pi_table([1.0, 0.0, 0.5, 1.0, 0.0])
    for seed in range(50):
        d = design.draw_sample(t, seed)
        assert "u000" in d.unit_ids and "u003" in d.unit_ids
        assert "u001" not in d.unit_ids and "u004" not in d.unit_ids
    a = design.draw_sample(t, 7)
    b = design.draw_sample(t.sample(frac=1.0, random_state=1), 7)
    assert a.unit_ids == b.unit_ids
    np.testing.assert_array_equal(a.pi, b.pi)


def test_draw_missing_pi_raises():
    t = _pi_table([0.5, np.nan])
    with pytest.raises(design.DesignError, match="u001"):
        design.draw_sample(t, 0)


def test_inclusion_frequency_matches_pi():
    rng = np.random.default_rng(0)
    pi = rng.uniform(0, 1, 100)
    ids = [f"u{k:03d}" for k in range(100)]
    R = 10_000
    hits = np.zeros(100)
    for seed in range(R):
        u = np.array([design.unit_uniform(seed, i) for i in ids])
        hits += u < pi
    se = np.sqrt(pi * (1 - pi) / R)
    z = np.abs(hits / R - pi) / np.maximum(se, 1e-12)
    # 3-SE per unit; with 100 units allow the few expected excursions of a two-sided 0.27% tail
    assert np.sum(z > 3) <= 3


def test_realized_size_within_four_sd():
    rng = np.random.default_rng(1)
    cells = _cells([[(1, x) for x in rng.uniform(0, 1, 200)]])
    pi = design.inclusion_probabilities(cells, np.array([40])).pi
    t = _pi_table(pi)
    var = float(np.sum(pi * (1 - pi)))
    sizes = np.array([design.draw_sample(t, s).n for s in range(1000)])
    assert np.all(np.abs(sizes - 40) <= 4 * np.sqrt(var))
    assert abs(sizes.mean() - 40) < 4 * np.sqrt(var / 1000)
