"""Polylogarithm on the unit circle, used for the power-law moving-average density.

For ``X_n = sum_{k>=1} k**-beta xi_{n-k}`` the transfer function is
``Li_beta(e^{ix})`` and the spectral density is its squared modulus.  For
0 < mu < 2*pi and non-integer beta,

    Li_beta(e^{i mu}) = Gamma(1-beta) (-i mu)**(beta-1) + sum_k zeta(beta-k) (i mu)**k / k!

which converges geometrically on [0, pi] (ratio mu / 2pi <= 1/2).
"""
from __future__ import annotations

import numpy as np
from scipy.special import factorial, gamma, zeta

_N_TERMS = 64


def polylog_unit_circle(beta: float, x) -> np.ndarray:
    """``Li_beta(e^{ix})`` for 0 < beta < 1 and x in [-pi, pi] (x != 0)."""
    x = np.asarray(x, dtype=float)
    mu = np.abs(x)
    k = np.arange(_N_TERMS)
    coef = zeta(beta - k) / factorial(k)
    z = 1j * mu
    acc = np.zeros(mu.shape, dtype=complex)
    for c in coef[::-1]:
        acc = acc * z + c
    with np.errstate(divide="ignore", invalid="ignore"):
        out = gamma(1.0 - beta) * (-1j * mu) ** (beta - 1.0) + acc
    return np.where(x < 0, np.conj(out), out)


def power_law_density(beta: float, x) -> np.ndarray:
    """``|Li_beta(e^{ix})|**2`` for 1/2 < beta <= 1; infinite at x = 0."""
    x = np.asarray(x, dtype=float)
    mu = np.abs(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        if beta == 1.0:
            # Li_1(e^{ix}) = -log(2 sin(x/2)) + i (pi - x)/2 on (0, 2pi)
            out = np.log(2.0 * np.sin(0.5 * mu)) ** 2 + (0.5 * (np.pi - mu)) ** 2
        else:
            out = np.abs(polylog_unit_circle(beta, mu)) ** 2
    return np.where(mu == 0.0, np.inf, out)
