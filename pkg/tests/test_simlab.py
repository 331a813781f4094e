from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bisgsamp import design, simlab
from bisgsamp.ingest import default_geo_prior


def _small(**kw):
    base = dict(n_surnames=40, m=3000, n1=400, n_target=60, replicates=3, betas=(1000.0,), seed=5)
    base.update(kw)
    return simlab.SimConfig(**base)


def test_frame_size_follows_fraction():
    cfg = simlab.SimConfig.profile("full")
    assert cfg.n0 == 1_176_500
    assert cfg.n1 / cfg.n0 == pytest.approx(0.02)
    with pytest.raises(ValueError, match="unknown profile"):
        simlab.SimConfig.profile("huge")


def test_majority_stratum_distribution():
    prior = default_geo_prior()
    want = prior.p_g_given_r * (1 - prior.p_r_given_g) / prior.p_r_given_g
    np.testing.assert_allclose(prior.p_g_given_not_r(), want / want.sum(), rtol=1e-12)


def test_universe_rows_on_simplex_and_names_distinct():
    rng = np.random.default_rng(0)
    u = simlab.gen_surname_universe(_small(), rng, 7)
    np.testing.assert_allclose(u.theta.sum(axis=1), 1.0, atol=1e-12)
    assert len(set(u.names)) == len(u.names) == 40
    assert all(len(n) == 6 for n in u.names)


def test_dirichlet_mean_matches_gamma_share():
    gamma = np.array([0.5, 1.5, 3.0])
    draws = np.random.default_rng(1).dirichlet(gamma, size=200_000)
    mean = draws.mean(axis=0)
    sd = draws.std(axis=0) / np.sqrt(draws.shape[0])
    assert np.all(np.abs(mean - gamma / gamma.sum()) < 4 * sd)


def test_nu_transform_hand_values():
    np.testing.assert_allclose(simlab.nu_transform(np.array([[0.7, 0.3]]), 1.0), [[0.4013, 0.5987]], atol=1e-4)
    np.testing.assert_allclose(simlab.nu_transform(np.array([[0.9, 0.05, 0.05]]), 0.0), [[1 / 3] * 3])


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1e4), st.integers(0, 10_000))
def test_nu_rows_on_simplex(beta, seed):
    rng = np.random.default_rng(seed)
    theta = rng.dirichlet(np.ones(8), size=3)
    nu = simlab.nu_transform(theta, beta, rng.standard_normal(theta.shape))
    assert np.all(nu >= 0)
    np.testing.assert_allclose(nu.sum(axis=1), 1.0, atol=1e-12)


def test_tv_distance():
    assert simlab.tv_distance([0.5, 0.5, 0.0], [0.2, 0.5, 0.3]) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        simlab.tv_distance([1.0], [0.5, 0.5])


def test_generated_counts_add_up():
    cfg = _small()
    prior = default_geo_prior()
    rng = np.random.default_rng(2)
    u = simlab.gen_surname_universe(cfg, rng, prior.n_strata)
    counts = simlab.gen_minority_data(cfg.m, u.theta, prior, rng, u.names)
    assert counts.counts.sum() == cfg.m
    frame = simlab.gen_frame(cfg, u, prior, 100.0, rng)
    assert frame.n1.sum() == cfg.n1 and frame.n0.sum() == cfg.n0
    p = frame.p_true
    assert np.all((p >= 0) & (p <= 1))
    assert np.all(p[frame.n == 0] == 0)


def test_roster_matches_cells():
    cfg = _small(n1=50)
    prior = default_geo_prior()
    rng = np.random.default_rng(3)
    u = simlab.gen_surname_universe(cfg, rng, prior.n_strata)
    frame = simlab.gen_frame(cfg, u, prior, 10.0, rng)
    roster = frame.to_roster()
    assert len(roster) == frame.n.sum()
    assert roster["r"].sum() == frame.n1.sum()
    assert roster["unit_id"].is_unique


def test_expected_yield_ordering_on_simulated_frame():
    cfg = _small(n1=2000)
    prior = default_geo_prior()
    rng = np.random.default_rng(4)
    u = simlab.gen_surname_universe(cfg, rng, prior.n_strata)
    frame = simlab.gen_frame(cfg, u, prior, 1000.0, rng)
    realized = frame.realized_prior(prior.p_g_given_r)
    cells = frame.cells()
    out = {m: design.make_plan(m, cells, realized, 200).diagnostics["yield"] for m in ("srs", "stratified", "poisson")}
    assert out["poisson"] >= out["stratified"] >= out["srs"] - 1e-12


def test_simulate_deterministic_and_job_invariant():
    cfg = _small()
    a = simlab.simulate(cfg)
    b = simlab.simulate(cfg)
    c = simlab.simulate(cfg, n_jobs=2)
    assert a == b == c
    s = a["summary"]["1000.0"]
    assert s["poisson_true"]["yield"]["mean"] > s["random"]["yield"]["mean"]


def test_estimated_mode_runs_and_orders():
    cfg = _small(probability_modes=("true", "estimated"), fit_iters=60, fit_burn_in=20, replicates=2)
    rep = simlab.simulate(cfg)
    s = rep["summary"]["1000.0"]
    assert "poisson_estimated" in s
    assert s["poisson_estimated"]["yield"]["mean"] > s["random"]["yield"]["mean"]


def test_export_dataset_files(tmp_path):
    paths = simlab.export_dataset(_small(n1=100), tmp_path)
    for p in paths.values():
        assert (tmp_path / p.split("/")[-1]).exists()
