"""Collapsed hierarchical Multinomial-Dirichlet surname model.

Per stratum g the surname distribution is theta_g ~ Dirichlet(eta * alpha)
and the observed counts m_g. are Multinomial(theta_g). Integrating theta out
leaves a posterior over (alpha, eta), sampled here by Metropolis-within-Gibbs:
random disjoint surname pairs move along the line alpha_i + alpha_j = const,
then eta takes a multiplicative log-normal step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, log_ndtr, ndtr, ndtri

from ..ingest import SurnameCountMatrix
from . import backend

SQRT2 = math.sqrt(2.0)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# Gamma(shape, rate) presets for the eta prior
ETA_PRIORS = {
    "appendix": (1.0, 0.01),  # mean 100, sd 100
    "main_text": (0.01, 0.01),  # mean 1, variance 100
}


class ModelError(ValueError):
    """Invalid model state or a non-finite posterior evaluation."""


@dataclass
class Hyperparams:
    """Prior and proposal settings.

    `printed_form=True` switches two details to an alternative form: a
    single Gamma(eta) factor in the marginal posterior instead of one per
    stratum, and the eta proposal density without its 1/eta'' Jacobian.
    Both change the target, so this exists only for replication.
    """

    gamma: np.ndarray
    eta_prior_shape: float = 1.0
    eta_prior_rate: float = 0.01
    proposal_sigma_eta: float = 1.0
    pair_sigma_scale: float = 0.5
    eta_bounds: tuple[float, float] = (1e-8, 1e12)
    printed_form: bool = False

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=np.float64)
        if np.any(~(self.gamma > 1.0)):
            raise ModelError("every gamma_s must exceed 1")
        if not (self.eta_prior_shape > 0 and self.eta_prior_rate > 0):
            raise ModelError("eta prior shape and rate must be positive")
        if not (self.proposal_sigma_eta > 0 and self.pair_sigma_scale > 0):
            raise ModelError("proposal scales must be positive")
        lo, hi = self.eta_bounds
        if not (0 < lo < hi):
            raise ModelError("eta bounds must satisfy 0 < l < u")
        self.eta_bounds = (float(lo), float(hi))

    @classmethod
    def from_counts(cls, counts: SurnameCountMatrix, preset: str = "appendix", **kw) -> "Hyperparams":
        """Empirical-Bayes gamma_s = m_.s + 1 with a named eta prior preset."""
        if preset not in ETA_PRIORS:
            raise ValueError(f"unknown eta prior preset {preset!r}; choose from {sorted(ETA_PRIORS)}")
        shape, rate = ETA_PRIORS[preset]
        kw.setdefault("eta_prior_shape", shape)
        kw.setdefault("eta_prior_rate", rate)
        return cls(gamma=counts.col_totals.astype(np.float64) + 1.0, **kw)

    def gamma_power(self, n_strata: int) -> float:
        return 1.0 if self.printed_form else float(n_strata)


@dataclass
class ModelState:
    alpha: np.ndarray
    eta: float

    def __post_init__(self):
        self.alpha = np.array(self.alpha, dtype=np.float64)
        self.eta = float(self.eta)

    def validate(self, tol: float = 1e-10) -> None:
        if np.any(~(self.alpha > 0)):
            raise ModelError("alpha must be strictly positive")
        if abs(self.alpha.sum() - 1.0) > tol:
            raise ModelError(f"alpha sums to {self.alpha.sum():.15f}")
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise ModelError("eta must be positive and finite")

    def copy(self) -> "ModelState":
        return ModelState(self.alpha.copy(), self.eta)


def initial_state(hyper: Hyperparams, rng: np.random.Generator, method: str = "jitter") -> ModelState:
    """Starting point for a chain.

    "jitter": alpha_s proportional to gamma_s + Binomial(100, .5), eta from
    Binomial(100, .5) + 1 (the +1 keeps eta away from 0).
    "uniform": alpha_s = 1/|S|; "mle": alpha_s proportional to gamma_s.
    """
    S = hyper.gamma.shape[0]
    if method == "jitter":
        w = hyper.gamma + rng.binomial(100, 0.5, size=S)
    elif method == "uniform":
        w = np.ones(S)
    elif method == "mle":
        w = hyper.gamma.copy()
    else:
        raise ValueError(f"unknown init method {method!r}")
    eta = float(rng.binomial(100, 0.5) + 1)
    lo, hi = hyper.eta_bounds
    return ModelState(w / w.sum(), min(max(eta, lo), hi))


# --------------------------------------------------------------------------
# Posterior density
# --------------------------------------------------------------------------


def log_eta_prior(eta: float, hyper: Hyperparams) -> float:
    """Unnormalized Gamma(shape, rate) log density."""
    return (hyper.eta_prior_shape - 1.0) * math.log(eta) - hyper.eta_prior_rate * eta


def log_marginal_posterior(state: ModelState, counts: SurnameCountMatrix, hyper: Hyperparams) -> float:
    """Unnormalized log p(alpha, eta | m) with theta integrated out.

    The product over k = 1..m_gs of (m_gs - k + eta*alpha_s) is evaluated as
    lgamma(m_gs + eta*alpha_s) - lgamma(eta*alpha_s), which is O(1) per
    nonzero cell.
    """
    alpha = np.asarray(state.alpha, dtype=np.float64)
    eta = float(state.eta)
    if alpha.shape[0] != counts.shape[1]:
        raise ModelError("alpha length does not match the number of surnames")
    if not eta > 0:
        raise ModelError("eta must be positive")
    with np.errstate(divide="ignore", invalid="ignore"):
        log_alpha = np.log(alpha)
    bad = np.flatnonzero(~np.isfinite(log_alpha))
    if bad.size:
        raise ModelError(f"alpha underflow for surname {counts.surnames[bad[0]]!r}")
    val = log_eta_prior(eta, hyper)
    val += hyper.gamma_power(counts.shape[0]) * float(gammaln(eta))
    val += float(np.dot(hyper.gamma - 1.0, log_alpha))
    coo = counts.counts.tocoo()
    if coo.nnz:
        x = eta * alpha[coo.col]
        terms = gammaln(coo.data + x) - gammaln(x)
        if not np.all(np.isfinite(terms)):
            s = coo.col[np.flatnonzero(~np.isfinite(terms))[0]]
            raise ModelError(f"non-finite likelihood term for surname {counts.surnames[s]!r}")
        val += float(terms.sum())
    val -= float(gammaln(counts.row_totals + eta).sum())
    if not math.isfinite(val):
        raise ModelError("non-finite log posterior")
    return val


# --------------------------------------------------------------------------
# Proposals
# --------------------------------------------------------------------------


def pair_segment(alpha_i: float, alpha_j: float, box=((0.0, 1.0), (0.0, 1.0))):
    """End points of the feasible segment through (alpha_i, alpha_j) and distances to them."""
    (li, ui), (lj, uj) = box
    c = alpha_i + alpha_j
    p_left = (max(c - uj, li), min(c - li, uj))
    p_right = (min(c - lj, ui), max(c - ui, lj))
    L1 = SQRT2 * (alpha_i - p_left[0])
    L2 = SQRT2 * (p_right[0] - alpha_i)
    return p_left, p_right, L1, L2


def _truncnorm_logpdf(eps: float, sigma: float, lo: float, hi: float) -> float:
    z = eps / sigma
    Z = float(ndtr(hi / sigma)) - float(ndtr(lo / sigma))
    return -0.5 * z * z - LOG_SQRT_2PI - math.log(sigma) - math.log(Z)


def pair_log_q(alpha_i: float, alpha_j: float, alpha_i_to: float, box, sigma: float) -> float:
    """Log density (in arc length along the segment) of moving alpha_i to alpha_i_to."""
    _, _, L1, L2 = pair_segment(alpha_i, alpha_j, box)
    if L1 + L2 <= 0:
        return 0.0
    eps = SQRT2 * (alpha_i_to - alpha_i)
    return _truncnorm_logpdf(eps, sigma, -L1, L2)


def propose_alpha_pair(
    alpha_i: float,
    alpha_j: float,
    box=((0.0, 1.0), (0.0, 1.0)),
    sigma: float | None = None,
    rng: np.random.Generator | None = None,
    u: float | None = None,
):
    """Truncated-normal move along alpha_i + alpha_j = const, clipped to `box`.

    Returns (alpha_i', alpha_j', log_q_fwd, log_q_rev). A positive step moves
    toward the right end point (larger alpha_i). `u` fixes the uniform used
    for inverse-CDF sampling; otherwise it is drawn from `rng`.
    """
    if sigma is None:
        sigma = 0.5 * (alpha_i + alpha_j)
    if not sigma > 0:
        raise ModelError("sigma must be positive")
    c = alpha_i + alpha_j
    _, _, L1, L2 = pair_segment(alpha_i, alpha_j, box)
    if L1 + L2 <= 0:
        return alpha_i, alpha_j, 0.0, 0.0
    if u is None:
        if rng is None:
            raise ValueError("need rng or u")
        u = float(rng.random())
    lo_cdf = float(ndtr(-L1 / sigma))
    Z = float(ndtr(L2 / sigma)) - lo_cdf
    eps = sigma * float(ndtri(lo_cdf + u * Z))
    eps = min(max(eps, -L1), L2)
    ai = alpha_i + eps / SQRT2
    aj = c - ai
    fwd = _truncnorm_logpdf(eps, sigma, -L1, L2)
    _, _, L1n, L2n = pair_segment(ai, aj, box)
    rev = _truncnorm_logpdf(-eps, sigma, -L1n, L2n)
    return ai, aj, fwd, rev


def eta_log_q(to: float, frm: float, sigma: float, bounds=(1e-8, 1e12), jacobian: bool = True) -> float:
    """Piecewise log density of the clamped multiplicative eta proposal.

    At a bound the value is the log of the atom mass. In the interior it is
    log phi(log(to/frm)/sigma), minus log(sigma * to) when `jacobian` is set
    (the proper density with respect to eta).
    """
    lo, hi = bounds
    return float(backend._pykernel.eta_log_q(to, frm, sigma, lo, hi, jacobian))


def propose_eta(
    eta: float,
    sigma: float = 1.0,
    bounds=(1e-8, 1e12),
    rng: np.random.Generator | None = None,
    x: float | None = None,
    jacobian: bool = True,
):
    """eta' = eta * exp(X), X ~ N(0, sigma^2), clamped to `bounds`.

    Returns (eta'', log_q_fwd, log_q_rev). `x` fixes X.
    """
    lo, hi = bounds
    if not (sigma > 0 and 0 < lo < hi):
        raise ModelError("invalid eta proposal parameters")
    if not lo <= eta <= hi:
        raise ModelError(f"eta={eta} outside bounds [{lo}, {hi}]")
    if x is None:
        if rng is None:
            raise ValueError("need rng or x")
        x = sigma * float(rng.standard_normal())
    new = min(max(eta * math.exp(x), lo), hi)
    fwd = eta_log_q(new, eta, sigma, bounds, jacobian)
    rev = eta_log_q(eta, new, sigma, bounds, jacobian)
    return new, fwd, rev


# --------------------------------------------------------------------------
# Sampler
# --------------------------------------------------------------------------


@dataclass
class _Prepared:
    indptr: np.ndarray
    cnt: np.ndarray
    row_tot: np.ndarray
    n_strata: int

    @classmethod
    def from_counts(cls, counts: SurnameCountMatrix) -> "_Prepared":
        indptr, _, cnt = counts.by_surname()
        return cls(
            np.ascontiguousarray(indptr, dtype=np.int64),
            np.ascontiguousarray(cnt, dtype=np.float64),
            np.ascontiguousarray(counts.row_totals, dtype=np.float64),
            counts.shape[0],
        )


def random_pairs(perm: np.ndarray) -> np.ndarray:
    """Consecutive pairs of a permutation; with odd length the last index is paired again with its predecessor."""
    S = perm.shape[0]
    if S % 2:
        perm = np.concatenate([perm, perm[S - 2 : S - 1]])
    return np.ascontiguousarray(perm.reshape(-1, 2), dtype=np.int64)


@dataclass
class SweepStats:
    pair_accept: float
    eta_accept: bool


def _draw_sweep_randoms(rng: np.random.Generator, S: int):
    pairs = random_pairs(rng.permutation(S))
    d = pairs.shape[0]
    u = rng.random(d)
    logu = np.log(rng.random(d))
    z = float(rng.standard_normal())
    logu_eta = math.log(float(rng.random()))
    return pairs, u, logu, z, logu_eta


def _sweep(alpha, eta, rnd, hyper, prep, kernel):
    pairs, u, logu, z, logu_eta = rnd
    lo, hi = hyper.eta_bounds
    return kernel.sweep(
        alpha, eta, pairs, u, logu, z, logu_eta, hyper.gamma,
        prep.indptr, prep.cnt, prep.row_tot,
        hyper.eta_prior_shape, hyper.eta_prior_rate, hyper.gamma_power(prep.n_strata),
        hyper.pair_sigma_scale, hyper.proposal_sigma_eta, lo, hi, hyper.printed_form,
    )


def mwg_sweep(
    state: ModelState,
    counts: SurnameCountMatrix,
    hyper: Hyperparams,
    rng: np.random.Generator,
    backend_name: str | None = None,
) -> tuple[ModelState, SweepStats]:
    """One Metropolis-within-Gibbs sweep: all surname pairs, then eta."""
    S = counts.shape[1]
    if S < 2:
        raise ModelError("need at least two surnames")
    kernel = backend.get_kernel(backend_name)
    prep = _Prepared.from_counts(counts)
    alpha = np.ascontiguousarray(state.alpha, dtype=np.float64).copy()
    rnd = _draw_sweep_randoms(rng, S)
    eta, n_acc, eta_acc = _sweep(alpha, state.eta, rnd, hyper, prep, kernel)
    return ModelState(alpha, eta), SweepStats(n_acc / rnd[0].shape[0], bool(eta_acc))


@dataclass
class Chain:
    """Stored draws (every `thin`-th sweep) and per-sweep acceptance statistics."""

    alpha: np.ndarray  # (n_stored, S)
    eta: np.ndarray  # (n_stored,)
    iterations: np.ndarray  # sweep number (1-based) of each stored draw
    pair_accept: np.ndarray  # per sweep
    eta_accept: np.ndarray  # per sweep
    seed: int | None
    backend: str
    surnames: tuple[str, ...] = ()
    init: ModelState | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return int(self.eta.shape[0])

    def state(self, b: int) -> ModelState:
        return ModelState(self.alpha[b], self.eta[b])

    def acceptance(self, burn_in: int = 0) -> dict:
        keep = slice(burn_in, None)
        return {
            "pair_accept_mean": float(np.mean(self.pair_accept[keep])) if self.pair_accept[keep].size else float("nan"),
            "eta_accept_mean": float(np.mean(self.eta_accept[keep])) if self.eta_accept[keep].size else float("nan"),
        }


def run_chain(
    init: ModelState,
    counts: SurnameCountMatrix,
    hyper: Hyperparams,
    iters: int,
    seed: int | np.random.SeedSequence | None = 0,
    thin: int = 1,
    backend_name: str | None = None,
    progress=None,
) -> Chain:
    """Run `iters` sweeps from `init`; deterministic given `seed` and backend arithmetic."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if thin < 1:
        raise ValueError("thin must be >= 1")
    S = counts.shape[1]
    if S < 2:
        raise ModelError("need at least two surnames")
    if init.alpha.shape[0] != S:
        raise ModelError("initial alpha has wrong length")
    init.validate(tol=1e-8)
    kernel = backend.get_kernel(backend_name)
    rng = np.random.default_rng(seed)
    prep = _Prepared.from_counts(counts)

    n_store = iters // thin
    A = np.empty((n_store, S), dtype=np.float64)
    E = np.empty(n_store, dtype=np.float64)
    it = np.empty(n_store, dtype=np.int64)
    pacc = np.empty(iters, dtype=np.float64)
    eacc = np.empty(iters, dtype=bool)

    alpha = np.ascontiguousarray(init.alpha, dtype=np.float64).copy()
    eta = init.eta
    k = 0
    for t in range(iters):
        rnd = _draw_sweep_randoms(rng, S)
        eta, n_acc, eta_acc = _sweep(alpha, eta, rnd, hyper, prep, kernel)
        pacc[t] = n_acc / rnd[0].shape[0]
        eacc[t] = bool(eta_acc)
        if (t + 1) % thin == 0:
            A[k] = alpha
            E[k] = eta
            it[k] = t + 1
            k += 1
        if progress is not None:
            progress(t + 1, iters)
    return Chain(
        alpha=A, eta=E, iterations=it, pair_accept=pacc, eta_accept=eacc,
        seed=seed if isinstance(seed, (int, type(None))) else None,
        backend=kernel.BACKEND, surnames=tuple(counts.surnames), init=init.copy(),
    )


# --------------------------------------------------------------------------
# Posterior summaries
# --------------------------------------------------------------------------


@dataclass
class PosteriorSummary:
    strata: tuple[str, ...]
    surnames: tuple[str, ...]
    theta_hat: np.ndarray  # (G, S), rows sum to 1
    rho_hat: np.ndarray  # (G,)
    alpha_hat: np.ndarray  # (S,)
    eta_hat: float
    burn_in: int
    n_draws: int
    acceptance: dict = field(default_factory=dict)


def shrinkage_theta(m_gs, m_g, eta, alpha_s):
    """theta = (m_gs + eta*alpha_s) / (m_g. + eta)."""
    return (m_gs + eta * alpha_s) / (m_g + eta)


def shrinkage_theta_pooled(m_gs, m_g, eta, alpha_s):
    """theta = (1 - rho) * m_gs/m_g. + rho * alpha_s with rho = eta/(m_g. + eta); m_g.=0 gives alpha_s."""
    m_gs = np.asarray(m_gs, dtype=float)
    m_g = np.asarray(m_g, dtype=float)
    rho = eta / (m_g + eta)
    with np.errstate(invalid="ignore", divide="ignore"):
        raw = np.where(m_g > 0, m_gs / np.where(m_g > 0, m_g, 1.0), 0.0)
    return (1.0 - rho) * raw + rho * alpha_s


def posterior_summary(chain: Chain, counts: SurnameCountMatrix, burn_in: int = 0) -> PosteriorSummary:
    """Posterior means of theta_gs, rho_g, alpha and eta over draws after `burn_in`.

    `burn_in` counts sweeps; stored draws from sweeps <= burn_in are discarded.
    """
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    keep = chain.iterations > burn_in
    if not keep.any():
        raise ValueError(f"burn_in={burn_in} leaves no draws (chain has {int(chain.iterations[-1]) if len(chain) else 0} sweeps)")
    A = chain.alpha[keep]
    E = chain.eta[keep]
    B = E.shape[0]
    m_g = counts.row_totals.astype(np.float64)
    inv = 1.0 / (m_g[None, :] + E[:, None])  # (B, G)
    W = E[:, None] * inv  # eta / (m_g + eta)
    rho = W.mean(axis=0)
    a_term = (W.T @ A) / B  # (G, S): mean of eta*alpha_s/(m_g + eta)
    m_term = inv.mean(axis=0)  # mean of 1/(m_g + eta)
    theta = a_term + counts.counts.toarray().astype(np.float64) * m_term[:, None]
    return PosteriorSummary(
        strata=tuple(counts.strata),
        surnames=tuple(counts.surnames),
        theta_hat=theta,
        rho_hat=rho,
        alpha_hat=A.mean(axis=0),
        eta_hat=float(E.mean()),
        burn_in=int(burn_in),
        n_draws=int(B),
        acceptance=chain.acceptance(burn_in),
    )
