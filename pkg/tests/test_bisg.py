from __future__ import annotations

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from bisgsamp import bisg
from bisgsamp.hiermodel import PosteriorSummary
from bisgsamp.ingest import FrameAggregate, GeoPrior, InputError, SurnameCountMatrix


def _summary(strata, surnames, theta):
    theta = np.asarray(theta, dtype=float)
    return PosteriorSummary(
        strata=tuple(strata), surnames=tuple(surnames), theta_hat=theta,
        rho_hat=np.zeros(len(strata)), alpha_hat=np.full(len(surnames), 1 / len(surnames)),
        eta_hat=1.0, burn_in=0, n_draws=1, acceptance={},
    )


def _frame(strata, surnames, dense, keep=None):
    return FrameAggregate(tuple(strata), tuple(surnames), sparse.csr_matrix(np.asarray(dense)), keep=keep)


def _prior(strata, p):
    q = np.full(len(strata), 1.0 / len(strata))
    return GeoPrior(tuple(strata), np.asarray(p, dtype=float), q)


def _single_cell_table(theta, p_r, share_num=1, total=1000, ratios=None):
    # one stratum; surname A has `share_num` units out of `total`
    frame = _frame(["g"], ["A", "B"], [[share_num, total - share_num]])
    summ = _summary(["g"], ["A", "B"], [[theta, 1 - theta]])
    return bisg.build_table(summ, _prior(["g"], [p_r]), frame, ratios)


# --- bounds -------------------------------------------------------------------


def test_bound_interval_hand_values():
    lo, hi = bisg.bound_interval(0.001, 0.07)
    assert lo == 0.0
    assert hi == pytest.approx(0.001 / 0.07)
    lo, hi = bisg.bound_interval(0.99, 0.5)
    assert lo == pytest.approx(0.98)
    assert hi == 1.0


def test_theta_bounds_skip_filtered_and_empty_cells():
    frame = _frame(["g1", "g2"], ["A", "B", "C"], [[5, 0, 5], [1, 1, 8]], keep=np.array([True, True, False]))
    b = bisg.theta_bounds(frame, _prior(["g1", "g2"], [0.1, 0.2]))
    cells = set(zip(b.g.tolist(), b.s.tolist()))
    assert cells == {(0, 0), (1, 0), (1, 1)}
    assert np.all(b.lower <= b.upper)


def test_clamp_moves_only_out_of_bound_values():
    frame = _frame(["g"], ["A", "B"], [[1, 999]])
    prior = _prior(["g"], [0.07])
    summ = _summary(["g"], ["A", "B"], [[0.5, 0.5]])
    c = bisg.clamp_theta(summ, bisg.theta_bounds(frame, prior))
    # A is above its upper bound 0.001/0.07; B is below its lower bound (0.999 - 0.93)/0.07
    assert c.theta[0] == pytest.approx(0.001 / 0.07)
    assert c.theta[1] == pytest.approx((0.999 - 0.93) / 0.07)
    assert c.n_above == 1 and c.n_below == 1
    inside = bisg.clamp_theta(_summary(["g"], ["A", "B"], [[0.01, 0.99]]), bisg.theta_bounds(frame, prior))
    assert inside.n_clamped == 0
    np.testing.assert_array_equal(inside.theta, [0.01, 0.99])


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.integers(0, 50), min_size=6, max_size=6),
    st.lists(st.floats(0.01, 0.99), min_size=2, max_size=2),
    st.lists(st.floats(0.0, 1.0), min_size=6, max_size=6),
)
def test_clamped_theta_inside_bounds_and_layer_at_most_one(counts, p, raw):
    dense = np.array(counts).reshape(2, 3)
    dense[:, 0] += 1  # every stratum nonempty
    frame = _frame(["g1", "g2"], ["A", "B", "C"], dense)
    prior = _prior(["g1", "g2"], p)
    summ = _summary(["g1", "g2"], ["A", "B", "C"], np.array(raw).reshape(2, 3))
    b = bisg.theta_bounds(frame, prior)
    c = bisg.clamp_theta(summ, b)
    assert np.all(c.theta >= b.lower - 1e-15)
    assert np.all(c.theta <= b.upper + 1e-15)
    t = bisg.assemble(c, prior, frame)
    assert np.all(t.p_surname <= 1 + 1e-12)
    assert np.all(t.p_surname >= 0)


# --- assembly -----------------------------------------------------------------


def test_surname_layer_hand_value():
    t = _single_cell_table(0.002, 0.07)
    assert t.surname_prob("g", "A") == pytest.approx(0.14, rel=1e-12)


def test_zero_theta_gives_zero():
    t = _single_cell_table(0.0, 0.07)
    assert t.surname_prob("g", "A") == 0.0


def test_first_name_factor_truncates_at_one():
    # layer 0.2: theta * p / share = 0.02 * 0.1 / 0.01
    ratios = bisg.RatioTable({"ANN": 10.0})
    t = _single_cell_table(0.02, 0.1, share_num=10, ratios=ratios)
    assert t.surname_prob("g", "A") == pytest.approx(0.2)
    assert t.prob("ANN", "A", "g") == 1.0
    assert t.prob("ZED", "A", "g") == pytest.approx(0.2)
    assert t.prob(None, "A", "g") == pytest.approx(0.2)


def test_filtered_surnames_map_to_exactly_zero():
    minority = SurnameCountMatrix.from_dense(["g"], ["A"], [[4]])
    frame = _frame(["g"], ["A", "B"], [[3, 7]]).with_filter(minority)
    summ = _summary(["g"], ["A"], [[1.0]])
    t = bisg.build_table(summ, _prior(["g"], [0.3]), frame)
    assert t.surname_prob("g", "B") == 0.0
    roster = pd.DataFrame({"first_name": [None, "X"], "surname": ["B", "NEW"], "stratum": ["g", "g"]})
    assert np.all(t.unit_probabilities(roster) == 0.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 0.01), st.floats(0.0, 0.01), st.floats(0.01, 0.5), st.floats(0.0, 0.4), st.floats(0.1, 12))
def test_probability_monotone_in_theta_prior_and_ratio(t1, dt, p, dp, r):
    p2 = min(p + dp, 0.95)
    lo = _single_cell_table(t1, p, ratios=bisg.RatioTable({"F": r})).prob("F", "A", "g")
    hi_t = _single_cell_table(t1 + dt, p, ratios=bisg.RatioTable({"F": r})).prob("F", "A", "g")
    hi_p = _single_cell_table(t1, p2, ratios=bisg.RatioTable({"F": r})).prob("F", "A", "g")
    hi_r = _single_cell_table(t1, p, ratios=bisg.RatioTable({"F": r * 1.5})).prob("F", "A", "g")
    assert hi_t >= lo - 1e-15
    assert hi_p >= lo - 1e-15
    assert hi_r >= lo - 1e-15


def test_unit_probabilities_match_scalar_lookup():
    frame = _frame(["g1", "g2"], ["A", "B"], [[10, 90], [50, 50]])
    prior = _prior(["g1", "g2"], [0.1, 0.2])
    summ = _summary(["g1", "g2"], ["A", "B"], [[0.3, 0.7], [0.6, 0.4]])
    t = bisg.build_table(summ, prior, frame, bisg.RatioTable({"ANN": 2.0}))
    roster = pd.DataFrame({
        "first_name": ["ANN", None, "BOB", "ANN"],
        "surname": ["A", "B", "A", "B"],
        "stratum": ["g1", "g1", "g2", "g2"],
    })
    got = t.unit_probabilities(roster)
    want = [t.prob(f, s, g) for f, s, g in roster.itertuples(index=False)]
    np.testing.assert_allclose(got, want, rtol=0, atol=0)
    np.testing.assert_allclose(t.unit_probabilities(roster, use_first_names=False),
                               [t.surname_prob(g, s) for _, s, g in roster.itertuples(index=False)])


def test_missing_prior_stratum_raises():
    frame = _frame(["g1", "zz"], ["A"], [[1], [1]])
    with pytest.raises(InputError, match="zz"):
        bisg.theta_bounds(frame, _prior(["g1"], [0.1]))


def test_table_csv_round_trip(tmp_path):
    frame = _frame(["g1", "g2"], ["A", "B"], [[10, 90], [50, 50]])
    prior = _prior(["g1", "g2"], [0.1, 0.2])
    summ = _summary(["g1", "g2"], ["A", "B"], [[0.3, 0.7], [0.6, 0.4]])
    t = bisg.build_table(summ, prior, frame)
    t.to_csv(tmp_path / "bisg.csv")
    head = pd.read_csv(tmp_path / "bisg.csv").columns.tolist()
    assert head[:6] == ["stratum", "surname", "theta_hat", "theta_lower", "theta_upper", "p_surname_layer"]
    back = bisg.BisgTable.read_csv(tmp_path / "bisg.csv", t.ratios, frame)
    np.testing.assert_array_equal(back.p_surname, t.p_surname)
    np.testing.assert_array_equal(back.g, t.g)


# --- first-name ratios --------------------------------------------------------


def test_ratio_hand_value_and_threshold():
    minority = {"ANN": 30, "BOB": 5, "CY": 65}
    frame = {"ANN": 100, "BOB": 1, "CY": 899}
    r = bisg.first_name_ratio(minority, frame, min_count=10, cap=10)
    # ANN: (30/100) / (100/1000) = 3; BOB under the count threshold
    assert r.get("ANN") == pytest.approx(3.0)
    assert "BOB" not in r.ratios
    assert r.get("BOB") == 1.0
    assert r.get(None) == 1.0


def test_ratio_cap_and_missing_frame_name():
    minority = {"RARE": 50, "X": 50}
    frame = {"RARE": 1, "X": 10000, "Y": 5}
    r = bisg.first_name_ratio(minority, frame, min_count=10, cap=10)
    assert r.get("RARE") == 10.0
    assert r.n_capped == 1
    r2 = bisg.first_name_ratio({"ONLY": 20, "X": 1}, {"X": 10}, min_count=10)
    assert "ONLY" in r2.excluded
    assert r2.get("ONLY") == 1.0


def test_ratio_csv_round_trip(tmp_path):
    r = bisg.first_name_ratio({"ANN": 30, "CY": 70}, {"ANN": 100, "CY": 900})
    r.to_csv(tmp_path / "ratios.csv")
    back = bisg.RatioTable.read_csv(tmp_path / "ratios.csv")
    assert back.ratios == r.ratios
