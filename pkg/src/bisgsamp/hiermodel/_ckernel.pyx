# cython: language_level=3
"""Compiled Metropolis-within-Gibbs sweep; same arithmetic as _pykernel."""

from libc.math cimport exp, log, sqrt
from scipy.special.cython_special cimport gammaln, log_ndtr, ndtr, ndtri

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"

cdef double SQRT2 = sqrt(2.0)
cdef double LOG_SQRT_2PI = 0.5 * log(2.0 * 3.141592653589793)


cdef inline double _surname_loglik(double a, double eta, const double[::1] cnt,
                                   Py_ssize_t lo, Py_ssize_t hi) nogil:
    cdef double x = eta * a
    cdef double lx
    cdef double total = 0.0
    cdef Py_ssize_t k
    if hi <= lo:
        return 0.0
    lx = gammaln(x)
    for k in range(lo, hi):
        total += gammaln(cnt[k] + x) - lx
    return total


cdef double _eta_logtarget(double eta, const double[::1] alpha, const cnp.int64_t[::1] indptr,
                           const double[::1] cnt, const double[::1] row_tot,
                           double eta_shape, double eta_rate, double gamma_power) nogil:
    cdef double val = (eta_shape - 1.0) * log(eta) - eta_rate * eta
    cdef double acc = 0.0
    cdef Py_ssize_t s, g
    val += gamma_power * gammaln(eta)
    for s in range(alpha.shape[0]):
        if indptr[s + 1] > indptr[s]:
            val += _surname_loglik(alpha[s], eta, cnt, indptr[s], indptr[s + 1])
    for g in range(row_tot.shape[0]):
        acc += gammaln(row_tot[g] + eta)
    val -= acc
    return val


cdef double _eta_log_q(double to, double frm, double sigma, double lo, double hi,
                       bint jacobian) nogil:
    cdef double z, out
    if to >= hi:
        return log_ndtr(-log(hi / frm) / sigma)
    if to <= lo:
        return log_ndtr(log(lo / frm) / sigma)
    z = log(to / frm) / sigma
    out = -0.5 * z * z - LOG_SQRT_2PI
    if jacobian:
        out -= log(sigma * to)
    return out


def surname_loglik(double a, double eta, cnt):
    cdef const double[::1] c = np.ascontiguousarray(cnt, dtype=np.float64)
    return _surname_loglik(a, eta, c, 0, c.shape[0])


def eta_logtarget(double eta, alpha, indptr, cnt, row_tot,
                  double eta_shape, double eta_rate, double gamma_power):
    return _eta_logtarget(eta, np.ascontiguousarray(alpha, dtype=np.float64),
                          np.ascontiguousarray(indptr, dtype=np.int64),
                          np.ascontiguousarray(cnt, dtype=np.float64),
                          np.ascontiguousarray(row_tot, dtype=np.float64),
                          eta_shape, eta_rate, gamma_power)


def eta_log_q(double to, double frm, double sigma, double lo, double hi, bint jacobian):
    return _eta_log_q(to, frm, sigma, lo, hi, jacobian)


def sweep(double[::1] alpha, double eta, const cnp.int64_t[:, ::1] pairs,
          const double[::1] u_pair, const double[::1] logu_pair,
          double z_eta, double logu_eta, const double[::1] gamma,
          const cnp.int64_t[::1] indptr, const double[::1] cnt, const double[::1] row_tot,
          double eta_shape, double eta_rate, double gamma_power,
          double sigma_scale, double sigma_eta, double eta_lo, double eta_hi,
          bint literal):
    cdef Py_ssize_t r, i, j
    cdef Py_ssize_t d = pairs.shape[0]
    cdef long n_acc = 0
    cdef int eta_acc = 0
    cdef double ai, aj, c, plx, prx, L1, L2, sigma, lo_cdf, hi_cdf, Z, eps
    cdef double ai_new, aj_new, L1n, L2n, Zn, logr, eta_prop
    cdef bint on_atom, jac

    with nogil:
        for r in range(d):
            i = pairs[r, 0]
            j = pairs[r, 1]
            ai = alpha[i]
            aj = alpha[j]
            c = ai + aj
            plx = c - 1.0
            if plx < 0.0:
                plx = 0.0
            prx = c
            if prx > 1.0:
                prx = 1.0
            L1 = SQRT2 * (ai - plx)
            L2 = SQRT2 * (prx - ai)
            if L1 + L2 <= 0.0:
                n_acc += 1
                continue
            sigma = sigma_scale * c
            lo_cdf = ndtr(-L1 / sigma)
            hi_cdf = ndtr(L2 / sigma)
            Z = hi_cdf - lo_cdf
            eps = sigma * ndtri(lo_cdf + u_pair[r] * Z)
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
            Zn = ndtr(L2n / sigma) - ndtr(-L1n / sigma)
            if Zn <= 0.0:
                continue
            logr = (gamma[i] - 1.0) * (log(ai_new) - log(ai))
            logr += (gamma[j] - 1.0) * (log(aj_new) - log(aj))
            if indptr[i + 1] > indptr[i]:
                logr += (_surname_loglik(ai_new, eta, cnt, indptr[i], indptr[i + 1])
                         - _surname_loglik(ai, eta, cnt, indptr[i], indptr[i + 1]))
            if indptr[j + 1] > indptr[j]:
                logr += (_surname_loglik(aj_new, eta, cnt, indptr[j], indptr[j + 1])
                         - _surname_loglik(aj, eta, cnt, indptr[j], indptr[j + 1]))
            logr += log(Z) - log(Zn)
            if logu_pair[r] < logr:
                alpha[i] = ai_new
                alpha[j] = aj_new
                n_acc += 1

        eta_prop = eta * exp(sigma_eta * z_eta)
        if eta_prop > eta_hi:
            eta_prop = eta_hi
        elif eta_prop < eta_lo:
            eta_prop = eta_lo
        on_atom = eta_prop >= eta_hi or eta_prop <= eta_lo
        if literal or not on_atom:
            jac = not literal
            logr = _eta_logtarget(eta_prop, alpha, indptr, cnt, row_tot, eta_shape, eta_rate, gamma_power)
            logr -= _eta_logtarget(eta, alpha, indptr, cnt, row_tot, eta_shape, eta_rate, gamma_power)
            logr += _eta_log_q(eta, eta_prop, sigma_eta, eta_lo, eta_hi, jac)
            logr -= _eta_log_q(eta_prop, eta, sigma_eta, eta_lo, eta_hi, jac)
            if logu_eta < logr:
                eta = eta_prop
                eta_acc = 1
    return eta, n_acc, eta_acc
