"""Independent reference computations shared by the test modules.

Nothing here calls into the package: every linearised symbol is rebuilt
from the radial two-point problem ``w'' + (n-1) w'/r - lambda_k w / r^2 = 0``
solved numerically.
"""

import math

import numpy as np


def radial_profile(k, n, inner, outer, K, R):
    """``(w(r), w'(r))`` callables of the degree-k radial harmonic with the given end values."""
    if k == 0 and n == 2:
        b = (outer - inner) / math.log(R / K)
        return (lambda r: outer + b * math.log(r / R)), (lambda r: b / r)
    m = k + n - 2
    # scaled pair (r/R)^k and (K/r)^m stays O(1) on [K, R]
    mat = np.array([[(K / R) ** k, 1.0], [1.0, (K / R) ** m]])
    a, b = np.linalg.solve(mat, [inner, outer])
    w = lambda r: a * (r / R) ** k + b * (K / r) ** m
    dw = lambda r: a * k * (r / R) ** k / r - b * m * (K / r) ** m / r
    return w, dw


def curvature_factor(k, n):
    lam = k * k + (n - 2) * k
    return (lam - n + 1) / (n - 1)


def block_symbols(k, n, gamma, mu, R):
    """``(b1, drhoP, s12, s13, g1, mu_k)`` from explicit radial solves."""
    K = mu / gamma * R
    ck = curvature_factor(k, n)
    _, d_in = radial_profile(k, n, mu * ck / K, 0.0, K, R)   # inner boundary moved
    _, d_out = radial_profile(k, n, 0.0, gamma * ck / R, K, R)  # outer boundary moved
    b1, drho = d_in(K), d_out(K)
    s12, s13 = d_out(R), d_in(R)
    g1 = -drho / b1 if b1 != 0 else 0.0
    return b1, drho, s12, s13, g1, -(s12 + s13 * g1)


def exact_symbols_n2(k, gamma, mu, R):
    """Same as :func:`block_symbols` for n = 2, k >= 1, in rational arithmetic."""
    from fractions import Fraction as Fr

    gamma, mu, R = Fr(gamma), Fr(mu), Fr(R)
    K = mu / gamma * R
    ck = Fr(k * k - 1)

    def solve(inner, outer):
        # a r^k + b r^-k through (K, inner), (R, outer)
        det = K**k * R**-k - R**k * K**-k
        a = (inner * R**-k - outer * K**-k) / det
        b = (K**k * outer - R**k * inner) / det
        return lambda r: k * a * r ** (k - 1) - k * b * r ** (-k - 1)

    d_in = solve(mu * ck / K, Fr(0))
    d_out = solve(Fr(0), gamma * ck / R)
    b1, drho, s12, s13 = d_in(K), d_out(K), d_out(R), d_in(R)
    g1 = -drho / b1
    return b1, drho, s12, s13, g1, -(s12 + s13 * g1)
