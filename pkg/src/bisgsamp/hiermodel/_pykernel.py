"""Pure-Python Metropolis-within-Gibbs sweep.

Mirrors ``_ckernel.pyx`` operation for operation so both backends produce
bit-identical chains: scalar math goes through ``math`` (libm), special
functions through the cephes routines in ``scipy.special``, and every sum is
accumulated left to right.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln, log_ndtr, ndtr, ndtri

SQRT2 = math.sqrt(2.0)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

BACKEND = "python"


def _seqsum(values) -> float:
    total = 0.0
    for v in values:
        total += v
    return total


def surname_loglik(a: float, eta: float, cnt: np.ndarray) -> float:
    """sum over strata of log Gamma(m + eta*a) - log Gamma(eta*a)."""
    if cnt.size == 0:
        return 0.0
    x = eta * a
    lx = float(gammaln(x))
    total = 0.0
    for v in gammaln(cnt + x).tolist():
        total += v - lx
    return total


def eta_logtarget(
    eta: float,
    alpha: np.ndarray,
    indptr: np.ndarray,
    cnt: np.ndarray,
    row_tot: np.ndarray,
    eta_shape: float,
    eta_rate: float,
    gamma_power: float,
) -> float:
    """All eta-dependent terms of the collapsed log posterior."""
    val = (eta_shape - 1.0) * math.log(eta) - eta_rate * eta
    val += gamma_power * float(gammaln(eta))
    S = alpha.shape[0]
    for s in range(S):
        lo, hi = indptr[s], indptr[s + 1]
        if hi > lo:
            val += surname_loglik(float(alpha[s]), eta, cnt[lo:hi])
    val -= _seqsum(gammaln(row_tot + eta).tolist())
    return val


def eta_log_q(to: float, frm: float, sigma: float, lo: float, hi: float, jacobian: bool) -> float:
    """Log density (or atom mass) of proposing `to` from `frm` under clamped log-normal moves."""
    if to >= hi:
        return float(log_ndtr(-math.log(hi / frm) / sigma))
    if to <= lo:
        return float(log_ndtr(math.log(lo / frm) / sigma))
    z = math.log(to / frm) / sigma
    out = -0.5 * z * z - LOG_SQRT_2PI
    if jacobian:
        out -= math.log(sigma * to)
    return out


def sweep(
    alpha: np.ndarray,
    eta: float,
    pairs: np.ndarray,
    u_pair: np.ndarray,
    logu_pair: np.ndarray,
    z_eta: float,
    logu_eta: float,
    gamma: np.ndarray,
    indptr: np.ndarray,
    cnt: np.ndarray,
    row_tot: np.ndarray,
    eta_shape: float,
    eta_rate: float,
    gamma_power: float,
    sigma_scale: float,
    sigma_eta: float,
    eta_lo: float,
    eta_hi: float,
    literal: bool,
) -> tuple[float, int, int]:
    """One sweep over the given pairs then one eta update; `alpha` is updated in place.

    Returns (eta, accepted pair count, eta accepted flag).
    """
    n_acc = 0
    d = pairs.shape[0]
    for r in range(d):
        i = int(pairs[r, 0])
        j = int(pairs[r, 1])
        ai = float(alpha[i])
        aj = float(alpha[j])
        c = ai + aj
        plx = max(c - 1.0, 0.0)
        prx = min(c, 1.0)
        L1 = SQRT2 * (ai - plx)
        L2 = SQRT2 * (prx - ai)
        if L1 + L2 <= 0.0:
            n_acc += 1
            continue
        sigma = sigma_scale * c
        lo_cdf = float(ndtr(-L1 / sigma))
        hi_cdf = float(ndtr(L2 / sigma))
        Z = hi_cdf - lo_cdf
        eps = sigma * float(ndtri(lo_cdf + float(u_pair[r]) * Z))
        if eps < -L1:
            eps = -L1
        elif eps > L2:
            eps = L2
        ai_new = ai + eps / SQRT2
        aj_new = c - ai_new
        if ai_new <= 0.0 or aj_new <= 0.0:
            continue
        L1n = SQRT2 * (ai_new - plx)
        L2n = SQRT2 * (prx - ai_new)
        Zn = float(ndtr(L2n / sigma)) - float(ndtr(-L1n / sigma))
        if Zn <= 0.0:
            continue
        logr = (gamma[i] - 1.0) * (math.log(ai_new) - math.log(ai))
        logr += (gamma[j] - 1.0) * (math.log(aj_new) - math.log(aj))
        lo, hi = indptr[i], indptr[i + 1]
        if hi > lo:
            seg = cnt[lo:hi]
            logr += surname_loglik(ai_new, eta, seg) - surname_loglik(ai, eta, seg)
        lo, hi = indptr[j], indptr[j + 1]
        if hi > lo:
            seg = cnt[lo:hi]
            logr += surname_loglik(aj_new, eta, seg) - surname_loglik(aj, eta, seg)
        # truncated-normal Hastings term: the Gaussian kernels cancel, the normalizers do not
        logr += math.log(Z) - math.log(Zn)
        if logu_pair[r] < logr:
            alpha[i] = ai_new
            alpha[j] = aj_new
            n_acc += 1

    eta_prop = eta * math.exp(sigma_eta * z_eta)
    if eta_prop > eta_hi:
        eta_prop = eta_hi
    elif eta_prop < eta_lo:
        eta_prop = eta_lo
    on_atom = eta_prop >= eta_hi or eta_prop <= eta_lo
    eta_acc = 0
    if literal or not on_atom:
        logr = eta_logtarget(eta_prop, alpha, indptr, cnt, row_tot, eta_shape, eta_rate, gamma_power)
        logr -= eta_logtarget(eta, alpha, indptr, cnt, row_tot, eta_shape, eta_rate, gamma_power)
        jac = not literal
        logr += eta_log_q(eta, eta_prop, sigma_eta, eta_lo, eta_hi, jac)
        logr -= eta_log_q(eta_prop, eta, sigma_eta, eta_lo, eta_hi, jac)
        if logu_eta < logr:
            eta = eta_prop
            eta_acc = 1
    return eta, n_acc, eta_acc
