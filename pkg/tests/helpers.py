"""Shared independent oracles for the test suite."""

import math

import numpy as np
from scipy import integrate
from scipy.optimize import minimize
from scipy.stats import norm


def quadrature_log_marginal(y, Z, sigma2, tau2):
    """Numeric conjugate-integral oracle for a single block.

    Integrates the coefficient prior (variance sigma2 * tau2 per coordinate)
    against the Gaussian likelihood with adaptive quadrature, in a max-shifted
    exponent for stability.  Supports one or two design columns.
    """
    y = np.asarray(y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    k = Z.shape[1]
    sd = math.sqrt(sigma2)
    prior_sd = math.sqrt(sigma2 * tau2)

    def loglik(beta):
        r = y - Z @ np.asarray(beta)
        return float(
            np.sum(norm.logpdf(r, scale=sd)) + np.sum(norm.logpdf(beta, scale=prior_sd))
        )

    opt = minimize(lambda b: -loglik(b), np.zeros(k))
    c = -float(opt.fun)
    lim = 12.0 * prior_sd
    if k == 1:
        val, _ = integrate.quad(
            lambda b: math.exp(loglik([b]) - c),
            -lim,
            lim,
            epsabs=1e-13,
            epsrel=1e-11,
            limit=200,
        )
    elif k == 2:
        val, _ = integrate.dblquad(
            lambda b2, b1: math.exp(loglik([b1, b2]) - c),
            -lim,
            lim,
            -lim,
            lim,
            epsabs=1e-12,
            epsrel=1e-10,
        )
    else:
        raise ValueError("oracle supports k <= 2")
    return c + math.log(val)


def windowed_mass(cp_prob, t_1based, radius=5):
    """Posterior changepoint mass in a +-radius window around a 1-based index."""
    lo = max(0, t_1based - 1 - radius)
    hi = min(len(cp_prob), t_1based + radius)
    return float(np.sum(cp_prob[lo:hi]))
