"""Time evolution of the outer relative radius.

The vector field ``F(rho)`` is the outward normal velocity ``V = -d_n u`` of
the outer curve converted into the radial chart.  Time stepping is
exponential Euler on the split ``F = L rho + N(rho)``, where ``L`` is the
diagonal linearisation at the circle, wrapped in step-doubling error control.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from hsann import elliptic
from hsann import harmonics as hm
from hsann.errors import HSANNError, OutOfChart, StiffnessError
from hsann.geometry import RadialSurface, centroid_from_grid, translate_resample
from hsann.harmonics import SurfaceCoeffs
from hsann.inner_solver import InnerSolution, discretization, solve_inner
from hsann.params import ProblemParams
from hsann.spectrum import MultiplierTable

log = logging.getLogger(__name__)


def chart_velocity(f, fp, vn) -> np.ndarray:
    """Radial-graph velocity ``d f / dt`` of the curve ``r = f(theta)`` moving with normal speed ``vn``.

    The outward normal makes the angle with ``e_r`` whose cosine is ``f / sqrt(f^2 + f'^2)``.
    """
    return vn * np.sqrt(f * f + fp * fp) / f


def _field_from_solution(rho: np.ndarray, sol: InnerSolution, params: ProblemParams) -> np.ndarray:
    d = discretization(params)
    f = params.R * (1.0 + d.Bg[0] @ rho)
    fp = params.R * (d.Bg[1] @ rho)
    vn = -elliptic.neumann_trace(sol.u, f, fp, side="outer", theta=d.theta_g)
    return hm.analyze_array(chart_velocity(f, fp, vn) / params.R, params.k_max)


def vector_field(rho, params: ProblemParams, inner: InnerSolution | None = None) -> SurfaceCoeffs:
    """``d rho / dt`` at the outer curve ``rho`` (solving the inner problem unless given)."""
    arr = np.asarray(rho.coeffs if isinstance(rho, SurfaceCoeffs) else rho, dtype=float)
    if inner is None:
        inner = solve_inner(arr, params)
    return SurfaceCoeffs(params.k_max, _field_from_solution(arr, inner, params))


class FieldEvaluator:
    """Vector field with the inner solve warm-started from the previous call.

    The chord Jacobian is kept between calls and only rebuilt when the
    inner iteration stops contracting.
    """

    def __init__(self, params: ProblemParams):
        self.params = params
        self.warm = None
        self.jacobian = None
        self.last: InnerSolution | None = None
        self.last_rho: np.ndarray | None = None
        self.calls = 0
        d = discretization(params)
        # first-order response of the inner curve to the outer one, per slot
        self.gain = d.table.g1_k[hm.mode_degrees(params.k_max)]

    def solve(self, rho: np.ndarray) -> InnerSolution:
        warm = self.warm
        if warm is not None:
            warm = (warm[0].coeffs + self.gain * (rho - self.last_rho), warm[1])
        sol = solve_inner(rho, self.params, warm_start=warm, method="chord", jacobian=self.jacobian)
        self.warm = (sol.eta, sol.c)
        self.last_rho = np.array(rho, dtype=float)
        if sol.jacobian is not None:
            self.jacobian = sol.jacobian
        self.last = sol
        return sol

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        self.calls += 1
        return _field_from_solution(rho, self.solve(rho), self.params)


def linear_rates(params: ProblemParams) -> np.ndarray:
    """Diagonal of ``L`` per coefficient slot."""
    return discretization(params).table.chart_rates(hm.mode_degrees(params.k_max))


def phi1(z: np.ndarray) -> np.ndarray:
    """``(exp(z) - 1) / z`` with a series near zero."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-6
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 + z / 2 + z * z / 6, np.expm1(safe) / safe)


def etd1(rho: np.ndarray, dt: float, L: np.ndarray, nonlinear: np.ndarray) -> np.ndarray:
    """One exponential Euler step ``e^{L dt} rho + dt phi1(L dt) N``."""
    z = L * dt
    return np.exp(z) * rho + dt * phi1(z) * nonlinear


@dataclass
class StepResult:
    rho: np.ndarray
    dt_used: float
    dt_next: float
    error: float
    field: np.ndarray


def adaptive_step(rho: np.ndarray, dt: float, field_fn, L: np.ndarray, params: ProblemParams,
                  F0: np.ndarray | None = None) -> StepResult:
    """Step doubling: one step of ``dt`` against two of ``dt/2``.

    Accepted steps return the Richardson combination ``2 fine - coarse``.
    ``F0`` is the field at ``rho`` when already known.
    """
    F0 = field_fn(rho) if F0 is None else F0
    N0 = F0 - L * rho
    while True:
        if dt < params.dt_min:
            raise StiffnessError(f"step size fell below dt_min={params.dt_min:g}")
        try:
            coarse = etd1(rho, dt, L, N0)
            half = etd1(rho, dt / 2, L, N0)
            F_half = field_fn(half)
            fine = etd1(half, dt / 2, L, F_half - L * half)
        except HSANNError as exc:
            log.debug("step of %.3g rejected: %s", dt, exc)
            dt *= 0.5
            continue
        err = float(np.max(np.abs(fine - coarse)))
        if err <= params.step_tol:
            grow = 2.0 if err == 0 else min(2.0, max(0.5, 0.9 * math.sqrt(params.step_tol / err)))
            return StepResult(2.0 * fine - coarse, dt, dt * grow, err, F0)
        dt *= max(0.1, min(0.5, 0.9 * math.sqrt(params.step_tol / err)))


def etd_step(rho, dt: float, table: MultiplierTable, params: ProblemParams, field=None) -> SurfaceCoeffs:
    """Advance ``rho`` by exactly ``dt``, subdividing whenever the step-doubling estimate exceeds ``step_tol``.

    ``field`` replaces the vector field (a callable on coefficient arrays);
    by default the full free-boundary field is used.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    arr = np.array(rho.coeffs if isinstance(rho, SurfaceCoeffs) else rho, dtype=float)
    L = table.chart_rates(hm.mode_degrees(params.k_max))
    field_fn = field if field is not None else FieldEvaluator(params)
    t, h = 0.0, dt
    while t < dt * (1 - 1e-14):
        step = adaptive_step(arr, min(h, dt - t), field_fn, L, params)
        arr, t = step.rho, t + step.dt_used
        h = min(step.dt_next, dt)
    return SurfaceCoeffs(params.k_max, arr)


@dataclass
class Trajectory:
    params: ProblemParams
    times: np.ndarray
    states: np.ndarray  # (T, n_coeffs)
    diagnostics: dict = field(default_factory=dict)
    termination: str = "t_max"
    final_field: np.ndarray | None = None
    final_inner: InnerSolution | None = field(default=None, repr=False)

    def state(self, i: int = -1) -> SurfaceCoeffs:
        return SurfaceCoeffs(self.params.k_max, self.states[i])

    def surface(self, i: int = -1) -> RadialSurface:
        return RadialSurface(self.params.R, self.state(i))

    def __len__(self):
        return len(self.times)


DIAGNOSTIC_KEYS = ("volume", "centroid_x", "centroid_y", "c_x", "c_y",
                   "field_residual", "E_k0", "E_k1", "E_high")


def mode_energies(rho: np.ndarray) -> tuple[float, float, float]:
    """Squared raw amplitudes in degree 0, degree 1 and degrees >= 2."""
    rho = np.asarray(rho)
    return float(rho[0] ** 2), float(np.sum(rho[1:3] ** 2)), float(np.sum(rho[3:] ** 2))


def recentered_high_energy(rho: np.ndarray, params: ProblemParams, center=None) -> float:
    """Degree >= 2 energy of the curve translated so its centroid sits at the origin."""
    d = discretization(params)
    s = RadialSurface(params.R, SurfaceCoeffs(params.k_max, rho))
    if center is None:
        f = params.R * (1.0 + d.Bg[0] @ rho)
        center = centroid_from_grid(d.theta_g, f, params.R * (d.Bg[1] @ rho))
    shifted = translate_resample(s, -np.asarray(center), params.n_theta)
    return mode_energies(shifted.rho.coeffs)[2]


def diagnostics(rho: np.ndarray, F: np.ndarray, sol: InnerSolution, params: ProblemParams) -> dict:
    d = discretization(params)
    f = params.R * (1.0 + d.Bg[0] @ rho)
    fp = params.R * (d.Bg[1] @ rho)
    center = centroid_from_grid(d.theta_g, f, fp)
    e0, e1, _ = mode_energies(rho)
    return {
        "volume": float(0.5 * np.mean(f * f) * 2.0 * np.pi),
        "centroid_x": float(center[0]),
        "centroid_y": float(center[1]),
        "c_x": float(sol.c[0]),
        "c_y": float(sol.c[1]),
        "field_residual": float(np.max(np.abs(F))),
        "E_k0": e0,
        "E_k1": e1,
        "E_high": recentered_high_energy(rho, params, center),
    }


def default_time_scales(params: ProblemParams) -> tuple[float, float]:
    """``(dt0, t_max)`` from the slowest decaying degree-2 rate."""
    rate = abs(discretization(params).table.chart_rates([2])[0])
    return 0.1 / rate, 10.0 / rate


def simulate(rho0, t_max: float | None, params: ProblemParams, emit=None, dt0: float | None = None,
             dt_max: float | None = None) -> Trajectory:
    """Integrate from ``rho0`` until stationary (``sup |F| < stat_tol``) or ``t_max``.

    ``dt_max`` caps the adaptive step, which bounds the spacing of recorded
    snapshots (useful when fitting rates to the trajectory).
    ``emit`` receives one dict per recorded step (``t`` plus the diagnostics).
    Numerical failures end the run early; the trajectory computed so far is
    returned with ``termination = "error:<tag>"``.
    """
    params.require_planar()
    dt_default, t_default = default_time_scales(params)
    t_max = t_default if t_max is None else t_max
    dt = dt_default if dt0 is None else dt0
    rho = np.array(rho0.coeffs if isinstance(rho0, SurfaceCoeffs) else rho0, dtype=float)
    if rho.shape != (hm.n_coeffs(params.k_max),):
        rho = SurfaceCoeffs(len(rho) // 2, rho).truncate(params.k_max).coeffs.copy()
    L = linear_rates(params)
    ev = FieldEvaluator(params)
    times, states = [], []
    diag = {k: [] for k in DIAGNOSTIC_KEYS}
    t = 0.0
    termination = "t_max"
    F = None
    try:
        F = ev(rho)
        while True:
            times.append(t)
            states.append(rho.copy())
            record = diagnostics(rho, F, ev.last, params)
            for key, value in record.items():
                diag[key].append(value)
            if emit is not None:
                emit({"t": t, **record})
            if np.max(np.abs(F)) < params.stat_tol:
                termination = "stationary"
                break
            if t >= t_max * (1 - 1e-12):
                break
            if dt_max is not None:
                dt = min(dt, dt_max)
            step = adaptive_step(rho, min(dt, t_max - t), ev, L, params, F0=F)
            if np.max(np.abs(hm.synthesize(step.rho, params.n_theta))) >= 1.0:
                raise OutOfChart("outer curve left the chart (sup |rho| >= 1)")
            rho, t, dt = step.rho, t + step.dt_used, step.dt_next
            F = ev(rho)
    except HSANNError as exc:
        termination = f"error:{exc.tag}"
        log.warning("simulation stopped at t=%.4g: %s", t, exc)
    log.info("simulation finished at t=%.4g after %d steps (%s); %d field evaluations",
             t, len(times), termination, ev.calls)
    return Trajectory(params, np.array(times), np.array(states).reshape(len(times), hm.n_coeffs(params.k_max)),
                      {k: np.array(v) for k, v in diag.items()}, termination, F, ev.last)
