"""Implicit inner-boundary problem: given the outer curve, find the inner curve, drift and pressure.

Unknowns are the inner relative radius ``eta`` (all modes up to ``k_max``)
and the drift vector ``c``.  Equations are the harmonic coefficients of the
Neumann mismatch on the inner curve plus the centroid gap, so the Newton
system is square.

Internally both sides are made dimensionless: the mismatch is measured in
units of ``gamma / R**2``, the centroid gap in units of ``R`` and the drift in
units of ``gamma / R**2``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from hsann import elliptic
from hsann import harmonics as hm
from hsann.errors import ConditioningError, GeometryBreakdown, InnerSolveFailed, InvalidAnnulus
from hsann.geometry import centroid_from_grid, curvature
from hsann.harmonics import SurfaceCoeffs
from hsann.params import ProblemParams
from hsann.spectrum import MultiplierTable, multiplier_table

log = logging.getLogger(__name__)

_RECOVERABLE = (GeometryBreakdown, InvalidAnnulus, ConditioningError, FloatingPointError)


@dataclass(frozen=True)
class ResidualP:
    neumann_mismatch: SurfaceCoeffs
    centroid_gap: np.ndarray

    def vector(self) -> np.ndarray:
        return np.concatenate([self.neumann_mismatch.coeffs, self.centroid_gap])


@dataclass(frozen=True)
class InnerSolution:
    eta: SurfaceCoeffs
    c: np.ndarray
    u: elliptic.HarmonicSeries
    residual_norm: float
    newton_iters: int
    jacobian: np.ndarray | None = field(default=None, repr=False)


class _Discretization:
    """Evaluation matrices shared by every residual call for one parameter set."""

    def __init__(self, params: ProblemParams):
        self.params = params
        self.k_max = params.k_max
        self.nc = hm.n_coeffs(params.k_max)
        self.M = elliptic.collocation_size(params.ku, params.over_collocation)
        self.theta_c = hm.uniform_angles(self.M)
        self.Bc = [hm.basis_matrix(self.k_max, self.theta_c, d) for d in range(3)]
        self.N = params.n_theta
        self.theta_g = hm.uniform_angles(self.N)
        self.Bg = [hm.basis_matrix(self.k_max, self.theta_g, d) for d in range(2)]
        self.table = multiplier_table(params)


@lru_cache(maxsize=16)
def discretization(params: ProblemParams) -> _Discretization:
    return _Discretization(params)


def _boundary(B, coeffs, radius):
    return [radius * (1.0 + B[0] @ coeffs)] + [radius * (Bd @ coeffs) for Bd in B[1:]]


def _evaluate(rho, eta, c, d: _Discretization):
    """Raw residual pieces: mismatch grid on the inner curve, centroid gap, potential."""
    p = d.params
    fS, fSp, fSpp = _boundary(d.Bc, rho, p.R)
    fG, fGp, fGpp = _boundary(d.Bc, eta, p.K)
    gG, gGp = _boundary(d.Bg, eta, p.K)
    gS, gSp = _boundary(d.Bg, rho, p.R)
    u = elliptic.solve_dirichlet_points(
        d.theta_c, fS, p.gamma * curvature(fS, fSp, fSpp),
        d.theta_c, fG, p.mu * curvature(fG, fGp, fGpp), p.ku,
        domain=(float(np.min(gG)), float(np.max(gS))),
    )
    # normal on the inner curve taken pointing away from the origin; the
    # condition d_n u = c.n is insensitive to the orientation
    dn = -elliptic.neumann_trace(u, gG, gGp, side="inner", theta=d.theta_g)
    ct, st = np.cos(d.theta_g), np.sin(d.theta_g)
    c_r = c[0] * ct + c[1] * st
    c_t = -c[0] * st + c[1] * ct
    c_n = (gG * c_r - gGp * c_t) / np.sqrt(gG * gG + gGp * gGp)
    mismatch = hm.analyze_array(dn - c_n, p.k_max)
    gap = centroid_from_grid(d.theta_g, gG, gGp) - centroid_from_grid(d.theta_g, gS, gSp)
    return mismatch, gap, u


def _as_array(x, k_max):
    if isinstance(x, SurfaceCoeffs):
        if x.k_max != k_max:
            x = x.truncate(k_max)
        return np.asarray(x.coeffs)
    return np.asarray(x, dtype=float)


def residual(rho, eta, c, params: ProblemParams) -> ResidualP:
    """Neumann mismatch coefficients on the inner curve and centroid gap (physical units)."""
    params.require_planar()
    d = discretization(params)
    mismatch, gap, _ = _evaluate(_as_array(rho, d.k_max), _as_array(eta, d.k_max),
                                 np.asarray(c, dtype=float), d)
    return ResidualP(SurfaceCoeffs(d.k_max, mismatch), gap)


def linearized_inverse_at_zero(upsilon, b, params: ProblemParams, table: MultiplierTable | None = None):
    """Invert the linearisation of the residual in ``(eta, c)`` at the concentric state.

    ``upsilon`` holds mismatch coefficients, ``b`` a centroid gap.  Returns the
    inner-curve correction ``zeta`` and the drift ``c``.  Degree-1 amplitudes are
    converted through the normalised basis so the drift formula reads exactly
    as in the multiplier table.
    """
    table = table or discretization(params).table
    ups = _as_array(upsilon, params.k_max)
    b = np.asarray(b, dtype=float)
    deg = hm.mode_degrees(params.k_max)
    zeta = np.zeros_like(ups)
    mask = deg != 1
    zeta[mask] = ups[mask] / table.b1_k[deg[mask]]
    c = -table.y1_scale * table.raw_to_y1(ups[1:3])
    zeta[1:3] = b / table.K
    return SurfaceCoeffs(params.k_max, zeta), c


class InnerProblem:
    """Scaled residual map ``x = (eta, c R^2/gamma) -> (mismatch R^2/gamma, gap / R)`` for a fixed outer curve."""

    def __init__(self, rho, params: ProblemParams):
        params.require_planar()
        self.params = params
        self.d = discretization(params)
        self.rho = _as_array(rho, params.k_max)
        self.nc = self.d.nc
        self.c_unit = params.gamma / params.R**2
        self.evals = 0

    def split(self, x):
        return x[: self.nc], x[self.nc :] * self.c_unit

    def __call__(self, x):
        eta, c = self.split(x)
        self.evals += 1
        mismatch, gap, u = _evaluate(self.rho, eta, c, self.d)
        return np.concatenate([mismatch / self.c_unit, gap / self.params.R]), u

    def fd_jacobian(self, x, F):
        h = self.params.fd_step
        J = np.empty((F.size, x.size))
        for j in range(x.size):
            xp = x.copy()
            xp[j] += h
            J[:, j] = (self(xp)[0] - F) / h
        return J

    def precondition(self, F):
        """Newton step from the closed-form inverse at the concentric state."""
        p = self.params
        zeta, c = linearized_inverse_at_zero(F[: self.nc] * self.c_unit, F[self.nc :] * p.R, p, self.d.table)
        return np.concatenate([zeta.coeffs, c / self.c_unit])


def linearized_jacobian(params: ProblemParams) -> np.ndarray:
    """Scaled Jacobian of the residual at the concentric state, rebuilt from its closed-form inverse."""
    prob = InnerProblem(np.zeros(hm.n_coeffs(params.k_max)), params)
    inv = np.column_stack([prob.precondition(e) for e in np.eye(prob.nc + 2)])
    return np.linalg.inv(inv)


def solve_inner(rho, params: ProblemParams, *, warm_start=None, method: str = "newton",
                jacobian: np.ndarray | None = None) -> InnerSolution:
    """Solve for the inner curve, drift and pressure given the outer curve ``rho``.

    ``method="newton"`` rebuilds a forward-difference Jacobian every iteration.
    ``method="chord"`` starts from ``jacobian`` (or the closed-form Jacobian at
    the concentric state when none is given), improves it with Broyden
    updates, and falls back to a fresh finite-difference Jacobian whenever
    the contraction stalls.  The returned ``jacobian`` can seed the next call.
    ``warm_start`` is an ``(eta, c)`` pair.
    """
    if method not in ("newton", "chord"):
        raise ValueError("method must be 'newton' or 'chord'")
    prob = InnerProblem(rho, params)
    x = np.zeros(prob.nc + 2)
    if warm_start is not None:
        eta0, c0 = warm_start
        x[: prob.nc] = _as_array(eta0, params.k_max)
        x[prob.nc :] = np.asarray(c0, dtype=float) / prob.c_unit
    try:
        F, u = prob(x)
    except _RECOVERABLE as exc:
        if warm_start is None:
            raise InnerSolveFailed(f"initial inner state invalid: {exc}") from exc
        return solve_inner(rho, params, method=method, jacobian=jacobian)
    J = jacobian
    if J is None and method == "chord":
        J = linearized_jacobian(params)
    lu = scipy.linalg.lu_factor(J) if J is not None else None
    norm = float(np.max(np.abs(F)))
    iters = 0
    refresh = method == "newton"
    while norm > params.newton_tol:
        if iters >= params.newton_max_iter:
            raise InnerSolveFailed(f"no convergence after {iters} iterations (residual {norm:.3e})")
        iters += 1
        fresh = refresh
        if refresh:
            J = prob.fd_jacobian(x, F)
            lu = scipy.linalg.lu_factor(J)
            refresh = False
        dx = -scipy.linalg.lu_solve(lu, F)
        lam, accepted = 1.0, False
        while lam >= 1.0 / 64:
            try:
                F_new, u_new = prob(x + lam * dx)
                new_norm = float(np.max(np.abs(F_new)))
                accepted = bool(np.isfinite(new_norm) and new_norm < norm)
            except _RECOVERABLE:
                accepted = False
            if accepted:
                break
            lam *= 0.5
        if not accepted:
            if fresh:
                raise InnerSolveFailed(f"line search failed at iteration {iters} (residual {norm:.3e})")
            refresh = True
            continue
        # a stale Jacobian that no longer contracts well gets rebuilt
        refresh = method == "newton" or new_norm > 0.5 * norm
        if method == "chord" and not refresh:
            step = lam * dx
            J = J + np.outer(F_new - F - J @ step, step) / (step @ step)
            lu = scipy.linalg.lu_factor(J)
        x, F, u, norm = x + lam * dx, F_new, u_new, new_norm
    eta, c = prob.split(x)
    log.debug("inner solve: %d iterations, %d residual evaluations, residual %.2e", iters, prob.evals, norm)
    return InnerSolution(SurfaceCoeffs(params.k_max, eta), c, u, norm, iters, J)
