"""Hierarchical Multinomial-Dirichlet surname model and its MCMC sampler."""

from __future__ import annotations

from .backend import available as available_backends
from .backend import get_kernel
from .io import read_summary, write_chain_csv, write_summary
from .model import (
    ETA_PRIORS,
    Chain,
    Hyperparams,
    ModelError,
    ModelState,
    PosteriorSummary,
    SweepStats,
    eta_log_q,
    initial_state,
    log_marginal_posterior,
    mwg_sweep,
    pair_log_q,
    pair_segment,
    posterior_summary,
    propose_alpha_pair,
    propose_eta,
    random_pairs,
    run_chain,
    shrinkage_theta,
    shrinkage_theta_pooled,
)

__all__ = [
    "ETA_PRIORS",
    "Chain",
    "Hyperparams",
    "ModelError",
    "ModelState",
    "PosteriorSummary",
    "SweepStats",
    "available_backends",
    "eta_log_q",
    "get_kernel",
    "initial_state",
    "log_marginal_posterior",
    "mwg_sweep",
    "pair_log_q",
    "pair_segment",
    "posterior_summary",
    "propose_alpha_pair",
    "propose_eta",
    "random_pairs",
    "read_summary",
    "run_chain",
    "shrinkage_theta",
    "shrinkage_theta_pooled",
    "write_chain_csv",
    "write_summary",
]
