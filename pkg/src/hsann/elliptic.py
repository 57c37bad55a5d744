"""Laplace equation on (perturbed) annuli.

For n = 2 the potential is a scaled Laurent-Fourier series

    u = alpha0 + beta0 log(r / r_out)
        + sum_k [A_k (r/r_out)^k + B_k (r_in/r)^k] cos(k t)
              + [C_k (r/r_out)^k + D_k (r_in/r)^k] sin(k t)

fitted to Dirichlet data on both boundaries by least-squares collocation.
Every basis function is harmonic, so the fit only has to match boundary data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.linalg.lapack

from hsann import harmonics as hm
from hsann.errors import ConditioningError, InvalidAnnulus, InvalidDimension, OutsideAnnulus, ShapeError

COND_LIMIT = 1e12


@dataclass(frozen=True)
class HarmonicSeries:
    K_u: int
    alpha0: float
    beta0: float
    coeffs: np.ndarray  # (K_u, 4): growing-cos, decaying-cos, growing-sin, decaying-sin
    r_out: float
    r_in: float
    r_min: float
    r_max: float
    boundary_residual: float = 0.0
    condition: float = 1.0
    n: int = 2

    def _check(self, r):
        slack = 1e-9 * self.r_max
        if np.any(r < self.r_min - slack) or np.any(r > self.r_max + slack):
            raise OutsideAnnulus("evaluation point outside the validity annulus")

    def _terms(self, r, theta):
        k = np.arange(1, self.K_u + 1)
        r, theta = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(theta, dtype=float))
        shape = r.shape + (self.K_u,)
        flat_r = r.reshape(-1)
        c, s = _trig(theta.reshape(-1), self.K_u) if theta.ndim == 1 else _trig_uncached(theta.reshape(-1), self.K_u)
        grow = _powers(flat_r / self.r_out, self.K_u).reshape(shape)
        decay = _powers(self.r_in / flat_r, self.K_u).reshape(shape)
        return k, r[..., None], grow, decay, c.reshape(shape), s.reshape(shape)

    def evaluate(self, r, theta) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        self._check(r)
        _, _, grow, decay, c, s = self._terms(r, theta)
        A, B, C, D = self.coeffs.T
        u = (A * grow + B * decay) * c + (C * grow + D * decay) * s
        return self.alpha0 + self.beta0 * np.log(r / self.r_out) + u.sum(axis=-1)

    def gradient(self, r, theta):
        """Polar derivatives ``(u_r, u_theta)``."""
        r = np.asarray(r, dtype=float)
        self._check(r)
        k, rr, grow, decay, c, s = self._terms(r, theta)
        A, B, C, D = self.coeffs.T
        g_r = k * grow / rr
        d_r = -k * decay / rr
        u_r = ((A * g_r + B * d_r) * c + (C * g_r + D * d_r) * s).sum(axis=-1) + self.beta0 / r
        u_t = (k * (-(A * grow + B * decay) * s + (C * grow + D * decay) * c)).sum(axis=-1)
        return u_r, u_t

    def laplacian(self, r, theta) -> np.ndarray:
        """``u_rr + u_r / r + u_tt / r^2`` from term-wise second derivatives."""
        r = np.asarray(r, dtype=float)
        self._check(r)
        k, rr, grow, decay, c, s = self._terms(r, theta)
        A, B, C, D = self.coeffs.T
        g_rr = k * (k - 1) * grow / rr**2
        d_rr = k * (k + 1) * decay / rr**2
        g_r = k * grow / rr
        d_r = -k * decay / rr
        u_rr = ((A * g_rr + B * d_rr) * c + (C * g_rr + D * d_rr) * s).sum(-1) - self.beta0 / r**2
        u_r = ((A * g_r + B * d_r) * c + (C * g_r + D * d_r) * s).sum(-1) + self.beta0 / r
        u_tt = (-(k**2) * ((A * grow + B * decay) * c + (C * grow + D * decay) * s)).sum(-1)
        return u_rr + u_r / r + u_tt / r**2

    def scaled(self, factor: float) -> HarmonicSeries:
        """The series multiplied by a constant."""
        return HarmonicSeries(
            self.K_u, self.alpha0 * factor, self.beta0 * factor, self.coeffs * factor,
            self.r_out, self.r_in, self.r_min, self.r_max, self.boundary_residual * abs(factor),
            self.condition, self.n,
        )


def _trig_uncached(theta, K_u: int):
    kt = np.outer(theta, np.arange(1, K_u + 1))
    return np.cos(kt), np.sin(kt)


@lru_cache(maxsize=32)
def _trig_cached(key: bytes, K_u: int):
    theta = np.frombuffer(key)
    kt = np.outer(theta, np.arange(1, K_u + 1))
    c, s = np.cos(kt), np.sin(kt)
    c.setflags(write=False)
    s.setflags(write=False)
    return c, s


def _trig(theta, K_u: int):
    """``cos(k theta), sin(k theta)`` for k = 1..K_u, cached since the same grids recur."""
    theta = np.ascontiguousarray(theta, dtype=float)
    return _trig_cached(theta.tobytes(), K_u)


def _powers(x, K_u: int):
    """``x**k`` for k = 1..K_u as columns."""
    return np.cumprod(np.repeat(x[:, None], K_u, axis=1), axis=1)


def _design(r, theta, K_u, r_out, r_in):
    c, s = _trig(theta, K_u)
    grow = _powers(r / r_out, K_u)
    decay = _powers(r_in / r, K_u)
    A = np.empty((r.size, 2 + 4 * K_u))
    A[:, 0] = 1.0
    A[:, 1] = np.log(r / r_out)
    A[:, 2::4] = grow * c
    A[:, 3::4] = decay * c
    A[:, 4::4] = grow * s
    A[:, 5::4] = decay * s
    return A


def solve_dirichlet_points(theta_S, r_S, g_S, theta_G, r_G, g_G, K_u: int,
                           domain: tuple[float, float] | None = None) -> HarmonicSeries:
    """Least-squares fit at explicit collocation points on the outer (S) and inner (G) boundary.

    ``domain`` widens the radial range on which the result may be evaluated
    (by default the span of the collocation radii).
    """
    r_S, r_G = np.asarray(r_S, float), np.asarray(r_G, float)
    if np.min(r_G) <= 0 or np.min(r_S) <= np.max(r_G):
        raise InvalidAnnulus("inner boundary must lie strictly inside the outer boundary")
    r_out, r_in = float(np.max(r_S)), float(np.min(r_G))
    A = np.vstack([_design(r_S, np.asarray(theta_S, float), K_u, r_out, r_in),
                   _design(r_G, np.asarray(theta_G, float), K_u, r_out, r_in)])
    b = np.concatenate([np.asarray(g_S, float), np.asarray(g_G, float)])
    qtb, Rf = scipy.linalg.qr_multiply(A, b, mode="right")
    # 1-norm condition estimate of the triangular factor (same as that of A up to a modest factor)
    rcond, info = scipy.linalg.lapack.dtrcon(Rf, norm="1", uplo="U", diag="N")
    cond = 1.0 / rcond if info == 0 and rcond > 0 else np.inf
    if not cond <= COND_LIMIT:
        raise ConditioningError(f"collocation matrix condition {cond:.3g} exceeds {COND_LIMIT:g}; "
                                "reduce K_u or the perturbation amplitude")
    x = scipy.linalg.solve_triangular(Rf, qtb, check_finite=False)
    resid = float(np.max(np.abs(A @ x - b)))
    r_lo, r_hi = float(np.min(r_G)), float(np.max(r_S))
    if domain is not None:
        r_lo, r_hi = min(r_lo, domain[0]), max(r_hi, domain[1])
    return HarmonicSeries(
        K_u=K_u, alpha0=float(x[0]), beta0=float(x[1]), coeffs=x[2:].reshape(K_u, 4),
        r_out=r_out, r_in=r_in, r_min=r_lo, r_max=r_hi,
        boundary_residual=resid, condition=cond,
    )


def _resample(grid, M):
    """Trigonometric interpolation of a uniform periodic grid onto ``M`` uniform points."""
    grid = np.asarray(grid, dtype=float)
    N = grid.size
    if N == M:
        return grid
    spec = np.fft.rfft(grid) / N
    theta = hm.uniform_angles(M)
    kmax = (N - 1) // 2
    k = np.arange(1, kmax + 1)
    out = spec[0].real + 2.0 * (np.cos(np.outer(theta, k)) @ spec[1 : kmax + 1].real
                                - np.sin(np.outer(theta, k)) @ spec[1 : kmax + 1].imag)
    if N % 2 == 0:
        out = out + spec[N // 2].real * np.cos(N // 2 * theta)
    return out


def collocation_size(K_u: int, over_collocation: float = 2.0) -> int:
    return int(math.ceil(over_collocation * (4 * K_u + 2)))


def solve_dirichlet(f_S, f_G, g_S, g_G, K_u: int, over_collocation: float = 2.0) -> HarmonicSeries:
    """Harmonic function with values ``g_S`` on ``r = f_S(t)`` and ``g_G`` on ``r = f_G(t)``.

    All four grids live on the same uniform mesh; they are interpolated onto
    ``over_collocation * (4 K_u + 2)`` collocation points per boundary.
    """
    grids = [np.asarray(a, dtype=float) for a in (f_S, f_G, g_S, g_G)]
    if len({a.shape for a in grids}) != 1 or grids[0].ndim != 1:
        raise ShapeError("all boundary grids must share one uniform mesh")
    M = collocation_size(K_u, over_collocation)
    fS, fG, gS, gG = (_resample(a, M) for a in grids)
    theta = hm.uniform_angles(M)
    return solve_dirichlet_points(theta, fS, gS, theta, fG, gG, K_u)


def neumann_trace(s: HarmonicSeries, f, fp, side: str = "outer", theta=None) -> np.ndarray:
    """Normal derivative on the boundary ``r = f(t)`` using the annulus' outward normal.

    On the outer side the normal points away from the origin; on the inner
    side it points into the hole, i.e. toward the origin.
    """
    f, fp = np.asarray(f, float), np.asarray(fp, float)
    if theta is None:
        theta = hm.uniform_angles(f.size)
    u_r, u_t = s.gradient(f, theta)
    radial = (f * u_r - fp * u_t / f) / np.sqrt(f * f + fp * fp)
    if side == "outer":
        return radial
    if side == "inner":
        return -radial
    raise ValueError("side must be 'inner' or 'outer'")


@dataclass(frozen=True)
class RadialModeProfile:
    """``a r^k + b r^-(k+n-2)`` (or ``a + b log r`` when k = 0, n = 2) on ``K <= r <= R``."""

    k: int
    n: int
    a: float
    b: float
    K: float
    R: float
    log_mode: bool = field(default=False)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.log_mode:
            return self.a + self.b * np.log(r)
        return self.a * r**self.k + self.b * r ** (-(self.k + self.n - 2))

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        if self.log_mode:
            return self.b / r
        m = self.k + self.n - 2
        return self.a * self.k * r ** (self.k - 1) - self.b * m * r ** (-m - 1)


def concentric_mode_solution(k: int, n: int, value_inner: float, value_outer: float, K: float, R: float) -> RadialModeProfile:
    """Radial profile of the degree-``k`` harmonic taking the given values at ``r = K`` and ``r = R``."""
    if n < 2:
        raise InvalidDimension(f"n must be >= 2, got {n}")
    if not 0 < K < R:
        raise InvalidAnnulus("need 0 < K < R")
    if k == 0 and n == 2:
        b = (value_outer - value_inner) / math.log(R / K)
        a = value_outer - b * math.log(R)
        return RadialModeProfile(k, n, a, b, K, R, log_mode=True)
    m = k + n - 2
    mat = np.array([[K**k, K ** (-m)], [R**k, R ** (-m)]])
    a, b = np.linalg.solve(mat, [value_inner, value_outer])
    return RadialModeProfile(k, n, float(a), float(b), K, R)
