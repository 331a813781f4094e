from __future__ import annotations

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from bisgsamp import estimate
from bisgsamp.ingest import GeoPrior, InputError


def test_hajek_hand_value_and_scale_invariance():
    y = np.array([1.0, 3.0, 5.0])
    pi = np.array([0.5, 0.25, 0.5])
    # weights 2, 4, 2: (2 + 12 + 10) / 8 = 3
    assert estimate.hajek_from_pi(y, pi) == pytest.approx(3.0)
    w = estimate.WeightVector(np.array([1.0, 2.0, 3.0]))
    assert estimate.hajek_mean([2.0, 3.0, 4.0], w) == pytest.approx(10 / 3)
    assert estimate.hajek_mean([2.0, 3.0, 4.0], 7.5 * w.values) == pytest.approx(10 / 3)


def test_hajek_skips_missing_outcomes():
    assert estimate.hajek_mean([1.0, np.nan, 3.0], [1.0, 5.0, 1.0]) == pytest.approx(2.0)
    with pytest.raises(estimate.EstimationError):
        estimate.hajek_mean([], [])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(0.01, 100)), min_size=1, max_size=30), st.floats(0.01, 1e3))
def test_hajek_inside_range_and_scale_free(rows, c):
    y = np.array([r[0] for r in rows])
    w = np.array([r[1] for r in rows])
    m = estimate.hajek_mean(y, w)
    assert y.min() - 1e-9 <= m <= y.max() + 1e-9
    assert estimate.hajek_mean(y, c * w) == pytest.approx(m, rel=1e-9, abs=1e-9)


def test_weight_vector_validation_and_summary():
    with pytest.raises(estimate.EstimationError):
        estimate.WeightVector(np.array([1.0, 0.0]))
    s = estimate.WeightVector(np.array([1.0, 1.0, 2.0])).summary()
    assert s["sum"] == 4.0 and s["ess"] == pytest.approx(16 / 6)


def _prior(q):
    return GeoPrior(tuple(q), np.full(len(q), 0.1), np.array(list(q.values())))


def test_stratified_mean_hand_value():
    prior = _prior({"a": 0.5, "b": 0.5})
    assert estimate.stratified_mean([1, 3, 2], ["a", "a", "b"], prior) == pytest.approx(2.0)
    prior = _prior({"a": 0.2, "b": 0.8})
    assert estimate.stratified_mean([2.0, 1.0], ["a", "b"], prior) == pytest.approx(1.2)


def test_stratified_mean_empty_stratum_drop_or_raise():
    prior = _prior({"a": 0.25, "b": 0.25, "c": 0.5})
    with pytest.warns(RuntimeWarning, match="dropping 1 strata"):
        got = estimate.stratified_mean([1.0, 3.0], ["a", "b"], prior)
    assert got == pytest.approx(2.0)
    with pytest.raises(estimate.EstimationError, match="'c'"):
        estimate.stratified_mean([1.0, 3.0], ["a", "b"], prior, strict=True)


# --- raking -------------------------------------------------------------------


def _table_units(table):
    rows, cols = [], []
    for i in range(2):
        for j in range(2):
            rows += [f"r{i}"] * table[i][j]
            cols += [f"c{j}"] * table[i][j]
    return pd.DataFrame({"row": rows, "col": cols})


def test_rake_matches_classic_ipf():
    table = [[10, 20], [30, 40]]
    X = _table_units(table)
    res = estimate.rake(X, [("row", {"r0": 0.5, "r1": 0.5}), ("col", {"c0": 0.5, "c1": 0.5})])
    assert res.converged
    fitted = oracles.ipf_oracle(table, [0.5, 0.5], [0.5, 0.5])
    per_unit = fitted / np.array(table)
    want = np.array([per_unit[int(r[1]), int(c[1])] for r, c in zip(X["row"], X["col"])])
    np.testing.assert_allclose(res.weights.values, want, rtol=1e-8)
    assert res.weights.values.sum() == pytest.approx(100.0)


def test_rake_leaves_matching_weights_unchanged():
    X = pd.DataFrame({"x": ["a", "a", "b", "b"]})
    w = np.array([1.0, 2.0, 1.5, 1.5])
    res = estimate.rake(X, [("x", {"a": 0.5, "b": 0.5})], init=w)
    np.testing.assert_allclose(res.weights.values, w, rtol=1e-12)
    assert res.iterations == 0


def test_rake_errors_name_the_category():
    X = pd.DataFrame({"x": ["a", "a"]})
    with pytest.raises(estimate.EstimationError, match="x='b'"):
        estimate.rake(X, [("x", {"a": 0.5, "b": 0.5})])
    X = pd.DataFrame({"x": ["a", "z"]})
    with pytest.raises(estimate.EstimationError, match="x='z'"):
        estimate.rake(X, [("x", {"a": 1.0})])
    with pytest.raises(estimate.EstimationError, match="probability distribution"):
        estimate.rake(X, [("x", {"a": 0.7, "z": 0.7})])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(["a", "b", "c"]), min_size=6, max_size=40), st.integers(0, 1000))
def test_rake_hits_margin_and_keeps_total(cats, seed):
    cats = list(cats) + ["a", "b", "c"]
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.5, 3.0, len(cats))
    X = pd.DataFrame({"x": cats})
    target = dict(zip("abc", rng.dirichlet(np.ones(3)) * 0.98 + 0.02 / 3))
    res = estimate.post_stratify(X, "x", target, init=w)
    share = pd.Series(res.values).groupby(X["x"]).sum() / res.values.sum()
    for k, v in target.items():
        assert share[k] == pytest.approx(v, abs=1e-10)
    assert res.values.sum() == pytest.approx(w.sum())


def test_trim_linear_percentiles():
    w = np.arange(1.0, 11.0)
    t = estimate.trim_weights(w, 1, 99)
    # linear rule: 1 + 0.09 * 9 and 1 + 0.99 * 9
    assert t.values.min() == pytest.approx(1.09)
    assert t.values.max() == pytest.approx(9.91)
    t = estimate.trim_weights(np.arange(1.0, 101.0), 10, 90)
    assert t.values.min() == pytest.approx(10.9)
    assert t.values.max() == pytest.approx(90.1)


# --- targets from the frame ---------------------------------------------------


def test_derive_target_hand_value():
    p = pd.DataFrame({"stratum": ["g", "g"], "surname": ["A", "B"], "p": [0.5, 0.1]})
    xt = pd.DataFrame({
        "stratum": ["g"] * 4, "surname": ["A", "A", "B", "B"],
        "x": ["f", "m", "f", "m"], "count": [10, 30, 50, 50],
    })
    t = estimate.derive_target(p, xt)
    # f: 5 + 5 = 10, m: 15 + 5 = 20
    assert t["f"] == pytest.approx(1 / 3)
    assert t["m"] == pytest.approx(2 / 3)
    assert t.sum() == pytest.approx(1.0, abs=1e-12)


def test_derive_target_all_zero_raises():
    p = pd.DataFrame({"stratum": ["g"], "surname": ["A"], "p": [0.0]})
    xt = pd.DataFrame({"stratum": ["g"], "surname": ["A"], "x": ["f"], "count": [3]})
    with pytest.raises(estimate.EstimationError):
        estimate.derive_target(p, xt)


# --- responses ----------------------------------------------------------------


def test_response_set_join_and_errors():
    sample = pd.DataFrame({"unit_id": ["u1", "u2", "u3"], "stratum": ["g"] * 3, "pi": [0.5, 0.25, 1.0]})
    resp = pd.DataFrame({"unit_id": ["u1", "u2", "u3"], "responded": [1, 1, 0], "r": [1, 0, 1], "y": [2.0, 9.0, 4.0]})
    rs = estimate.ResponseSet(resp, sample)
    mr = rs.minority_respondents()
    assert mr["unit_id"].tolist() == ["u1"]
    np.testing.assert_allclose(rs.ipw().values, [2.0])
    bad = resp.assign(unit_id=["u1", "u2", "u9"])
    with pytest.raises(InputError, match="u9"):
        estimate.ResponseSet(bad, sample)
    with pytest.raises(InputError, match="responded"):
        estimate.ResponseSet(resp.drop(columns="responded"), sample)
