"""Closed-form Fourier multipliers of the problem linearised at the concentric annulus.

Symbols are written in terms of ``q = K / R`` so that high degrees neither
overflow nor lose relative accuracy.  With ``m = 2k + n - 2`` and
``c_k = (lambda_k - n + 1) / (n - 1)``:

* ``b1``     normal derivative at r = K of the inner-boundary response,
* ``drhoP``  normal derivative at r = K of the outer-boundary response,
* ``s12``    normal derivative at r = R of the outer-boundary response,
* ``s13``    normal derivative at r = R of the inner-boundary response,
* ``g1``     first-order response of the inner boundary to the outer one.

At n = 2, k = 0 every ratio ``(n-2)/(1-q^(n-2))`` is replaced by its limit
``1/log(1/q)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from hsann.harmonics import mode_eigenvalue, mode_multiplicity
from hsann.params import ProblemParams


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def _c(k, n):
    return (mode_eigenvalue(k, n) - n + 1) / (n - 1)


def _m_over_gap(k, n, q):
    """``m / (1 - q^m)`` with its log limit at m = 0."""
    m = 2 * k + n - 2
    if m == 0:
        return 1.0 / math.log(1.0 / q)
    return m / -math.expm1(m * math.log(q))


def _qm(k, n, q):
    return q ** (2 * k + n - 2)


def mu_closed_form(k: int, n: int, gamma: float, mu: float, R: float) -> float:
    """Eigenvalue of the linearised evolution on degree ``k`` (zero on the kernel k = 0, 1)."""
    if k < 2:
        return 0.0
    q = mu / gamma
    qm = _qm(k, n, q)
    num = k * (k + n - 2) * -math.expm1((2 * k + n - 2) * math.log(q))
    return -(gamma / R**2) * _c(k, n) * num / (k * qm + (k + n - 2))


def _symbols(k, n, gamma, mu, R):
    K = mu / gamma * R
    q = K / R
    c = _c(k, n)
    m = 2 * k + n - 2
    if m == 0:
        inv_gap = 1.0 / math.log(1.0 / q)  # (n-2)/(1-q^(n-2)) in the limit
        b1 = -(mu / K**2) * c * inv_gap
        s12 = (gamma / R**2) * c * inv_gap
        s13 = -(mu / K**2) * c * q * inv_gap
        drho = (gamma / R**2) * c * inv_gap / q
    else:
        qm = _qm(k, n, q)
        gap = -math.expm1(m * math.log(q))
        b1 = -(mu / K**2) * c * (k * qm + (k + n - 2)) / gap
        s12 = (gamma / R**2) * c * (k + (k + n - 2) * qm) / gap
        s13 = -(mu / K**2) * c * m * q ** (k + n - 1) / gap
        drho = (gamma / R**2) * c * m * q ** (k - 1) / gap
    if k == 1:
        g1 = R / K
    else:
        g1 = -drho / b1
    return b1, drho, s12, s13, g1


@dataclass(frozen=True)
class MultiplierTable:
    n: int
    gamma: float
    mu: float
    R: float
    K: float
    sigma_n: float
    k_max: int
    lambda_k: np.ndarray
    d_k: np.ndarray
    mu_k: np.ndarray
    b1_k: np.ndarray
    drhoP_k: np.ndarray
    s12_k: np.ndarray
    s13_k: np.ndarray
    g1_k: np.ndarray

    @property
    def y1_scale(self) -> float:
        """``sqrt(n / sigma_n)``: ``Y_1l = y1_scale * omega_l`` for the normalised degree-1 harmonics."""
        return math.sqrt(self.n / self.sigma_n)

    def raw_to_y1(self, raw):
        """Degree-1 coefficients in the normalised basis from raw ``omega_l`` amplitudes."""
        return np.asarray(raw, dtype=float) / self.y1_scale

    def y1_to_raw(self, y):
        return np.asarray(y, dtype=float) * self.y1_scale

    def chart_rates(self, degrees) -> np.ndarray:
        """Growth rates of the relative radius ``rho`` per slot (``mu_k / R``)."""
        return self.mu_k[np.asarray(degrees)] / self.R

    def rows(self):
        for k in range(self.k_max + 1):
            yield {
                "k": k,
                "lambda_k": float(self.lambda_k[k]),
                "d_k": int(self.d_k[k]),
                "mu_k": float(self.mu_k[k]),
                "b1_k": float(self.b1_k[k]),
                "drhoP_k": float(self.drhoP_k[k]),
                "s12_k": float(self.s12_k[k]),
                "s13_k": float(self.s13_k[k]),
                "g1_k": float(self.g1_k[k]),
                "mu_assembled": float(mu_assembled(k, self)),
            }


def multiplier_table(params: ProblemParams | None = None, k_max: int | None = None, *, n=None, gamma=None,
                     mu=None, R=None) -> MultiplierTable:
    """Tabulate every per-degree symbol up to ``k_max``.

    Either pass ``params`` or the keyword constants; keywords override ``params``.
    """
    p = params or ProblemParams(k_max=max(2, k_max or 2), n_theta=4 * (max(2, k_max or 2) + 1))
    n = p.n if n is None else n
    gamma = p.gamma if gamma is None else gamma
    mu = p.mu if mu is None else mu
    R = p.R if R is None else R
    k_max = p.k_max if k_max is None else k_max
    ks = range(k_max + 1)
    sym = np.array([_symbols(k, n, gamma, mu, R) for k in ks])
    return MultiplierTable(
        n=n, gamma=gamma, mu=mu, R=R, K=mu / gamma * R, sigma_n=sphere_area(n), k_max=k_max,
        lambda_k=np.array([mode_eigenvalue(k, n) for k in ks], dtype=float),
        d_k=np.array([mode_multiplicity(k, n) for k in ks]),
        mu_k=np.array([mu_closed_form(k, n, gamma, mu, R) for k in ks]),
        b1_k=sym[:, 0], drhoP_k=sym[:, 1], s12_k=sym[:, 2], s13_k=sym[:, 3], g1_k=sym[:, 4],
    )


def mu_assembled(k: int, table: MultiplierTable) -> float:
    """Eigenvalue rebuilt from the block symbols: ``-(s12 + s13 * g1)``."""
    return -(table.s12_k[k] + table.s13_k[k] * table.g1_k[k])


@dataclass(frozen=True)
class ModeCheck:
    k: int
    l: int
    rate: float
    leakage: float
    expected: float


def jacobian_mode_check(k: int, eps: float, params: ProblemParams, l: int = 1) -> ModeCheck:
    """Measure the discretised vector field's response to ``eps`` times the mode ``(k, l)``.

    ``rate`` is the ``(k, l)`` projection of ``F(eps e) / eps``; ``leakage`` is the
    sup-norm of everything else divided by ``eps``.
    """
    from hsann.evolution import vector_field
    from hsann.harmonics import ModeIndex, SurfaceCoeffs

    if not 1e-6 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-6, 1e-3]")
    idx = ModeIndex(k, l).index
    rho = SurfaceCoeffs.from_modes(params.k_max, {(k, l): eps})
    out = vector_field(rho, params).coeffs / eps
    rate = float(out[idx])
    rest = out.copy()
    rest[idx] = 0.0
    expected = mu_closed_form(k, params.n, params.gamma, params.mu, params.R) / params.R
    return ModeCheck(k, l, rate, float(np.max(np.abs(rest))), expected)
