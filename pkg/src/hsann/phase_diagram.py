"""Long-time structure of the flow: decay rates, limit circles, symmetries and stable-manifold shooting."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from hsann import harmonics as hm
from hsann.errors import HSANNError, InsufficientDecay, ShootingFailed
from hsann.evolution import Trajectory, simulate
from hsann.geometry import RadialSurface, SphereData, dilate, enclosed_volume, translate_resample
from hsann.harmonics import SurfaceCoeffs
from hsann.inner_solver import discretization
from hsann.params import ProblemParams

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps


def spectral_gap(params: ProblemParams) -> float:
    """``|mu_2| / R``, the slowest nonzero decay rate of the chart variable."""
    return abs(float(discretization(params).table.chart_rates([2])[0]))


def fit_decay_rate(traj_or_times, energy=None, min_samples: int = 10) -> tuple[float, float]:
    """Exponential rate of ``sqrt(E_high)`` over its last decade of decay.

    Accepts a :class:`Trajectory` or explicit ``(times, energy)`` arrays.
    Returns ``(nu, rms_residual)`` with ``nu > 0`` for decay.
    """
    if isinstance(traj_or_times, Trajectory):
        times, energy = traj_or_times.times, traj_or_times.diagnostics["E_high"]
    else:
        times = traj_or_times
    times, energy = np.asarray(times, float), np.asarray(energy, float)
    keep = energy > 1e2 * EPS
    times, amp = times[keep], np.sqrt(energy[keep])
    if amp.size < min_samples:
        raise InsufficientDecay(f"only {amp.size} samples above the noise floor; need {min_samples}")
    window = amp <= 10.0 * amp[-1]
    # the window must be a trailing run of samples
    start = np.flatnonzero(~window)
    first = start[-1] + 1 if start.size else 0
    t, y = times[first:], np.log(amp[first:])
    if t.size < min_samples:
        raise InsufficientDecay(f"only {t.size} samples in the last decade of decay; need {min_samples}")
    slope, icpt = np.polyfit(t, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * t + icpt)) ** 2)))
    return float(-slope), resid


@dataclass(frozen=True)
class LimitPrediction:
    outer: SphereData
    inner: SphereData
    fitted_rate: float
    fit_residual: float
    terminal_outer: SphereData | None = None
    terminal_inner: SphereData | None = None
    trajectory: Trajectory | None = field(default=None, repr=False, compare=False)


def limit_radius(rho, params: ProblemParams) -> float:
    """Radius of the circle with the same enclosed area as ``R (1 + rho)``."""
    s = RadialSurface(params.R, rho if isinstance(rho, SurfaceCoeffs) else SurfaceCoeffs(params.k_max, rho))
    return math.sqrt(enclosed_volume(s, params.n_theta) / math.pi)


def circle_fit(s: RadialSurface, center, N: int) -> SphereData:
    """Mean distance of the curve from ``center`` (the curve recentred and resampled)."""
    shifted = translate_resample(s, -np.asarray(center, float), N)
    return SphereData(np.asarray(center, float), s.R_ref * (1.0 + shifted.rho.coeffs[0]))


def extrapolate_center(traj: Trajectory, rate: float, tail: int = 20) -> tuple[np.ndarray, float]:
    """Fit ``c0 + c1 exp(-rate t)`` to the last ``tail`` centroid samples; returns ``(c0, rms)``."""
    t = traj.times[-tail:]
    cx = traj.diagnostics["centroid_x"][-tail:]
    cy = traj.diagnostics["centroid_y"][-tail:]
    if t.size < 3 or not rate > 0:
        return np.array([cx[-1], cy[-1]]), 0.0
    A = np.column_stack([np.ones_like(t), np.exp(-rate * (t - t[-1]))])
    coef, *_ = np.linalg.lstsq(A, np.column_stack([cx, cy]), rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - np.column_stack([cx, cy])) ** 2)))
    return coef[0], resid


def predict_limit(rho0, params: ProblemParams, t_max: float | None = None) -> LimitPrediction:
    """Limit circles of the flow started at ``rho0``.

    The outer radius comes from area conservation, the centre from an
    exponential fit to the late centroid series of a simulation run towards
    stationarity; the inner circle is concentric with radius ``(mu/gamma) R_inf``.
    The simulated terminal circles are reported alongside for comparison.
    """
    rho0 = rho0 if isinstance(rho0, SurfaceCoeffs) else SurfaceCoeffs(params.k_max, rho0)
    r_inf = limit_radius(rho0, params)
    gap = spectral_gap(params)
    traj = simulate(rho0, 40.0 / gap if t_max is None else t_max, params)
    if traj.termination.startswith("error"):
        raise HSANNError(f"simulation failed ({traj.termination})")
    try:
        rate, resid = fit_decay_rate(traj)
    except InsufficientDecay:
        rate, resid = gap, 0.0
    center, c_resid = extrapolate_center(traj, rate)
    ratio = params.mu / params.gamma
    term_center = np.array([traj.diagnostics["centroid_x"][-1], traj.diagnostics["centroid_y"][-1]])
    term_outer = circle_fit(traj.surface(), term_center, params.n_theta)
    term_inner = None
    if traj.final_inner is not None:
        inner_surface = RadialSurface(params.K, traj.final_inner.eta)
        term_inner = circle_fit(inner_surface, term_center, params.n_theta)
    return LimitPrediction(
        outer=SphereData(center, r_inf),
        inner=SphereData(center, ratio * r_inf),
        fitted_rate=rate,
        fit_residual=max(resid, c_resid),
        terminal_outer=term_outer,
        terminal_inner=term_inner,
        trajectory=traj,
    )


@dataclass(frozen=True)
class InvarianceReport:
    translation_error: float
    dilation_error: float
    z: tuple
    lam: float
    T: float
    translation_tol: float = 1e-6
    dilation_tol: float = 1e-6

    @property
    def passed(self) -> bool:
        return self.translation_error <= self.translation_tol and self.dilation_error <= self.dilation_tol


def _interpolator(traj: Trajectory):
    """Cubic-in-time interpolation of the stored states; constant after a stationary stop."""
    if traj.termination.startswith("error"):
        raise ValueError(f"cannot interpolate a failed run ({traj.termination})")
    if len(traj) < 2:
        return lambda t: traj.states[-1]
    spline = CubicSpline(traj.times, traj.states, axis=0)
    t_end = traj.times[-1]

    def at(t):
        if t > t_end * (1 + 1e-12):
            if traj.termination != "stationary":
                raise ValueError(f"time {t} beyond the end of the run ({t_end})")
            return traj.states[-1]
        return spline(t)

    return at


def invariance_suite(rho0, z, lam: float, T: float, params: ProblemParams, n_samples: int = 21,
                     workers: int = 3) -> InvarianceReport:
    """Compare evolution with its translated and dilated copies.

    The translated run starts from ``rho0`` shifted by ``z``; the dilated run
    starts from the same coefficients with reference radius ``lam R``, so the
    dilated curve stays in its own chart.  Errors are sup-norm radius
    differences over ``n_samples`` times in ``[0, T]``.
    """
    if not 0.5 <= lam <= 2.0:
        raise ValueError("lam must lie in [0.5, 2]")
    rho0 = rho0 if isinstance(rho0, SurfaceCoeffs) else SurfaceCoeffs(params.k_max, rho0)
    z = np.asarray(z, dtype=float)
    base_surface = RadialSurface(params.R, rho0)
    shifted0 = translate_resample(base_surface, z, params.n_theta).rho
    dil_params = params.replace(R=lam * params.R)
    t_base = T * max(1.0, lam**-3)
    jobs = [(rho0, t_base, params), (shifted0, T, params), (rho0, T, dil_params)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        base, moved, scaled = pool.map(lambda a: simulate(*a), jobs)
    base_at, moved_at, scaled_at = (_interpolator(tr) for tr in (base, moved, scaled))
    N = params.n_theta
    trans_err = dil_err = 0.0
    for t in np.linspace(0.0, T, n_samples):
        b = RadialSurface(params.R, SurfaceCoeffs(params.k_max, base_at(t)))
        expect = translate_resample(b, z, N).rho.coeffs if np.any(z) else b.rho.coeffs
        diff = hm.synthesize(moved_at(t) - expect, N)
        trans_err = max(trans_err, params.R * float(np.max(np.abs(diff))))
        diff = hm.synthesize(scaled_at(t) - base_at(t * lam**-3), N)
        dil_err = max(dil_err, lam * params.R * float(np.max(np.abs(diff))))
    return InvarianceReport(trans_err, dil_err, tuple(z.tolist()), float(lam), float(T))


def graph_of_circle(target: SphereData, params: ProblemParams) -> SurfaceCoeffs:
    """Coefficients of ``target`` as a radial graph over ``R``."""
    base = RadialSurface(params.R, SurfaceCoeffs.from_modes(params.k_max, {(0, 1): target.radius / params.R - 1.0}))
    if not np.any(target.center):
        return base.rho
    return translate_resample(base, target.center, params.n_theta).rho


def _area_consistent_a0(c: np.ndarray, radius: float, R: float) -> float:
    """Mode-0 amplitude giving enclosed area ``pi radius^2`` with the other modes fixed."""
    rest = 0.5 * float(np.sum(c[1:] ** 2))
    val = (radius / R) ** 2 - rest
    if val <= 0:
        raise ShootingFailed("no mode-0 amplitude reproduces the target area")
    return math.sqrt(val) - 1.0


def stable_manifold_point(pert, target: SphereData, params: ProblemParams, tol: float = 1e-5,
                          max_iter: int = 20) -> SurfaceCoeffs:
    """Initial curve ``target + pert + (low modes)`` whose flow converges to ``target``.

    ``pert`` may only carry degrees >= 2.  The mode-0 amplitude is fixed
    exactly by area conservation; the two degree-1 amplitudes are corrected
    by a chord iteration on the simulated limit centre, with the Jacobian
    approximated by ``R`` times the identity (a degree-1 amplitude ``a``
    shifts the curve by about ``R a``).
    """
    pert = pert if isinstance(pert, SurfaceCoeffs) else SurfaceCoeffs(params.k_max, pert)
    if np.any(pert.coeffs[:3]):
        raise ValueError("perturbation must have only degree >= 2 content")
    c = graph_of_circle(target, params).coeffs + pert.coeffs
    c = c.copy()
    gap = spectral_gap(params)
    center_tol = 0.5 * tol
    for it in range(1, max_iter + 1):
        c[0] = _area_consistent_a0(c, target.radius, params.R)
        traj = simulate(c, 40.0 / gap, params)
        if traj.termination != "stationary":
            raise ShootingFailed(f"shooting run did not become stationary ({traj.termination})")
        center = np.array([traj.diagnostics["centroid_x"][-1], traj.diagnostics["centroid_y"][-1]])
        miss = center - target.center
        log.info("shooting iteration %d: centre miss %.3e", it, float(np.max(np.abs(miss))))
        if np.max(np.abs(miss)) <= center_tol:
            return SurfaceCoeffs(params.k_max, c)
        c[1:3] -= miss / params.R
    raise ShootingFailed(f"no convergence after {max_iter} shooting iterations")


@dataclass(frozen=True)
class FibreDecomposition:
    """``S0 = x0 + (R_inf / R) T0`` with ``T0`` converging to the reference circle."""

    center: np.ndarray
    scale: float
    T0: SurfaceCoeffs
    T0_limit: SphereData
    error: float


def fibre_decomposition(rho0, params: ProblemParams) -> FibreDecomposition:
    """Split ``rho0`` into a symmetry (translation, dilation) and a stable-manifold point.

    The error is the distance of the limit of ``T0`` from the circle of radius
    ``R`` centred at the origin.
    """
    rho0 = rho0 if isinstance(rho0, SurfaceCoeffs) else SurfaceCoeffs(params.k_max, rho0)
    pred = predict_limit(rho0, params)
    x0 = pred.terminal_outer.center if pred.terminal_outer is not None else pred.outer.center
    scale = pred.outer.radius / params.R
    moved = translate_resample(RadialSurface(params.R, rho0), -x0, params.n_theta)
    T0 = dilate(moved, 1.0 / scale).rho
    lim = predict_limit(T0, params)
    center = lim.terminal_outer.center
    err = max(float(np.max(np.abs(center))), abs(lim.outer.radius - params.R),
              abs(lim.terminal_outer.radius - params.R))
    return FibreDecomposition(np.asarray(x0), scale, T0, lim.terminal_outer, err)
