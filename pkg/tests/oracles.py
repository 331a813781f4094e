"""Independent reference computations used as test oracles.

These deliberately avoid the package's own shortcuts (log-gamma identities,
vectorized allocation formulas) so agreement is meaningful.
"""

from __future__ import annotations

import functools
import math

import numpy as np
from scipy import integrate, special


def log_marginal_direct(alpha, eta, counts, gamma, shape, rate, n_strata_power=None):
    """Collapsed log posterior with the explicit product over k = 1..m_gs."""
    counts = np.asarray(counts)
    G, S = counts.shape
    power = G if n_strata_power is None else n_strata_power
    val = (shape - 1) * math.log(eta) - rate * eta + power * math.lgamma(eta)
    for s in range(S):
        val += (gamma[s] - 1) * math.log(alpha[s])
    for g in range(G):
        for s in range(S):
            for k in range(1, int(counts[g, s]) + 1):
                val += math.log(counts[g, s] - k + eta * alpha[s])
        val -= math.lgamma(counts[g].sum() + eta)
    return val


def log_full_posterior_theta_integrated(alpha, eta, counts, gamma, shape, rate):
    """Integrate theta out of the full posterior by numerical quadrature.

    Handles 2 or 3 surnames: theta_g lives on a 1- or 2-simplex per stratum
    and strata factorize. Includes the multinomial coefficient-free
    likelihood prod theta^m and the Dirichlet(eta*alpha) density.
    """
    counts = np.asarray(counts)
    G, S = counts.shape
    conc = eta * np.asarray(alpha, dtype=float)
    log_dir_norm = math.lgamma(conc.sum()) - sum(math.lgamma(c) for c in conc)
    val = (shape - 1) * math.log(eta) - rate * eta
    val += sum((gamma[s] - 1) * math.log(alpha[s]) for s in range(S))
    for g in range(G):
        e = conc + counts[g] - 1.0
        if S == 2:
            f = lambda t: t ** e[0] * (1 - t) ** e[1]
            I, _ = integrate.quad(f, 0, 1, epsabs=0, epsrel=1e-12, limit=200)
        elif S == 3:
            f = lambda t2, t1: t1 ** e[0] * t2 ** e[1] * max(1 - t1 - t2, 0.0) ** e[2]
            I, _ = integrate.dblquad(f, 0, 1, 0, lambda t1: 1 - t1, epsabs=0, epsrel=1e-11)
        else:
            raise ValueError("oracle supports 2 or 3 surnames")
        val += log_dir_norm + math.log(I)
    return val


def quadrature_alpha_means(counts, gamma, shape, rate, n_ab=80, n_eta=400, eta_range=(1e-4, 1e6)):
    """Posterior means of alpha (3 surnames) and eta by tensor quadrature over (alpha, log eta)."""
    counts = np.asarray(counts, dtype=float)
    G, S = counts.shape
    assert S == 3
    x, w = np.polynomial.legendre.leggauss(n_ab)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    U, V = np.meshgrid(u, u, indexing="ij")
    WU = np.outer(wu, wu)
    a1 = U
    a2 = (1 - U) * V
    a3 = (1 - U) * (1 - V)
    jac = 1 - U
    A = np.stack([a1, a2, a3])  # (3, n, n)
    le = np.linspace(math.log(eta_range[0]), math.log(eta_range[1]), n_eta)
    lw = np.full(n_eta, le[1] - le[0])
    lw[[0, -1]] *= 0.5
    logp = np.empty((n_eta,) + U.shape)
    for k, l in enumerate(le):
        eta = math.exp(l)
        v = (shape - 1) * l - rate * eta + G * special.gammaln(eta) + l  # + l for d eta = eta d log eta
        v = v + sum((gamma[s] - 1) * np.log(A[s]) for s in range(S))
        for g in range(G):
            for s in range(S):
                if counts[g, s] > 0:
                    v = v + special.gammaln(counts[g, s] + eta * A[s]) - special.gammaln(eta * A[s])
            v = v - special.gammaln(counts[g].sum() + eta)
        logp[k] = v
    logp -= logp.max()
    p = np.exp(logp) * (lw[:, None, None] * (WU * jac)[None])
    Z = p.sum()
    means = np.array([(p * A[s][None]).sum() / Z for s in range(S)])
    eta_mean = (p.sum(axis=(1, 2)) * np.exp(le)).sum() / Z
    return means, eta_mean


def batch_means_se(x, n_batches=50):
    x = np.asarray(x, dtype=float)
    b = len(x) // n_batches
    m = x[: b * n_batches].reshape(n_batches, b).mean(axis=1)
    return m.std(ddof=1) / math.sqrt(n_batches)


@functools.lru_cache(maxsize=None)
def compositions(units: int, parts: int) -> np.ndarray:
    """All ways to write `units` as an ordered sum of `parts` positive integers, one per row."""
    if parts == 1:
        return np.array([[units]], dtype=np.int32) if units >= 1 else np.zeros((0, 1), dtype=np.int32)
    blocks = []
    for a in range(1, units - parts + 2):
        rest = compositions(units - a, parts - 1)
        blocks.append(np.hstack([np.full((rest.shape[0], 1), a, dtype=np.int32), rest]))
    return np.vstack(blocks)


def grid_argmin(objective_terms, n, L, step):
    """Exhaustive search over allocations in multiples of `step` (each > 0) summing to n.

    `objective_terms(alloc)` takes an (K, L) array and returns the (K,) objective values.
    """
    grid = compositions(n // step, L).astype(float) * step
    vals = objective_terms(grid)
    return grid[int(np.argmin(vals))]


def ipf_oracle(table, row_target, col_target, iters=1000):
    """Classic two-way IPF on a contingency table; returns the fitted table."""
    T = np.array(table, dtype=float)
    tot = T.sum()
    r = np.asarray(row_target) * tot
    c = np.asarray(col_target) * tot
    for _ in range(iters):
        T *= (r / T.sum(axis=1))[:, None]
        T *= (c / T.sum(axis=0))[None, :]
    return T
