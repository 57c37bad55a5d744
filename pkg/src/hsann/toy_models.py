"""Two small systems with the same phase-portrait structure, used as oracles.

* the planar flow ``x' = 0, y' = -y`` (a line of equilibria with vertical stable fibres);
* the 1-D heat equation with homogeneous Neumann data, whose equilibria are the
  constants and whose stable manifold is the zero-mean subspace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from hsann.errors import UnstableTimeStep


def planar_flow(x0: float, y0: float, t: float) -> tuple[float, float]:
    return x0, y0 * math.exp(-t)


def planar_shift(z: float, x: float, y: float) -> tuple[float, float]:
    """Action of the translation group on the plane."""
    return x + z, y


@dataclass(frozen=True)
class HeatState:
    values: np.ndarray
    time: float

    @property
    def M(self) -> int:
        return self.values.size - 1

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.M + 1)

    def mean(self) -> float:
        return discrete_mean(self.values)


def discrete_mean(u) -> float:
    """Trapezoid-weighted mean over ``[0, 1]``; exactly conserved by the scheme below."""
    u = np.asarray(u, dtype=float)
    M = u.size - 1
    return float((0.5 * u[0] + u[1:-1].sum() + 0.5 * u[-1]) / M)


def neumann_laplacian(M: int) -> scipy.sparse.csr_matrix:
    """Second difference on ``M + 1`` nodes with mirror ghost nodes at both ends."""
    if M < 2:
        raise ValueError("need at least 3 nodes")
    h = 1.0 / M
    main = np.full(M + 1, -2.0)
    upper = np.ones(M)
    lower = np.ones(M)
    upper[0] = 2.0  # ghost node u_{-1} = u_1
    lower[-1] = 2.0  # ghost node u_{M+1} = u_{M-1}
    return scipy.sparse.diags([lower, main, upper], [-1, 0, 1], format="csc") / (h * h)


def heat_neumann(u0, T: float, M: int | None = None, dt: float = 1e-3, scheme: str = "implicit") -> HeatState:
    """Advance the Neumann heat problem on ``[0, 1]`` to time ``T``.

    ``scheme`` is ``"implicit"`` (backward Euler, any ``dt``) or ``"explicit"``
    (forward Euler, requires ``dt <= h^2 / 2``).  The step is shrunk slightly
    so that an integer number of steps lands exactly on ``T``.
    """
    u = np.array(u0, dtype=float)
    M = u.size - 1 if M is None else M
    if u.size != M + 1:
        raise ValueError(f"expected {M + 1} grid values, got {u.size}")
    if not np.all(np.isfinite(u)):
        raise ValueError("initial values must be finite")
    if T < 0:
        raise ValueError("T must be nonnegative")
    if T == 0:
        return HeatState(u, 0.0)
    h = 1.0 / M
    if scheme == "explicit" and dt > 0.5 * h * h:
        raise UnstableTimeStep(f"explicit scheme needs dt <= h^2/2 = {0.5 * h * h:.3g}, got {dt:.3g}")
    steps = max(1, math.ceil(T / dt - 1e-9))
    dt = T / steps
    A = neumann_laplacian(M)
    if scheme == "implicit":
        lu = scipy.sparse.linalg.splu((scipy.sparse.identity(M + 1, format="csc") - dt * A).tocsc())
        for _ in range(steps):
            u = lu.solve(u)
    elif scheme == "explicit":
        for _ in range(steps):
            u = u + dt * (A @ u)
    else:
        raise ValueError("scheme must be 'implicit' or 'explicit'")
    return HeatState(u, T)


def discrete_neumann_eigenvalue(M: int, j: int = 1) -> float:
    """``j``-th eigenvalue of minus the discrete Neumann Laplacian on ``M + 1`` nodes."""
    h = 1.0 / M
    return 2.0 * (1.0 - math.cos(j * math.pi * h)) / (h * h)


@dataclass(frozen=True)
class HeatManifoldReport:
    mean: float
    limit_error: float  # sup |u(T) - mean|
    mean_drift: float
    zero_mean_final: float  # sup |v(T)| for v0 = u0 - mean
    decomposition_error: float  # sup |u(T) - (mean + v(T))|
    decay_rate: float
    eigenvalue: float
    contraction: bool  # discrete L2 norm of v nonincreasing at every sample


def heat_stable_manifold_check(u0, T: float = 5.0, dt: float = 1e-3, samples: int = 50) -> HeatManifoldReport:
    """Check the constant-plus-zero-mean splitting of the heat flow from ``u0``.

    The decay rate is measured on the zero-mean part between the last two
    samples that are clear of round-off, and converted from the backward-Euler amplification factor so it
    can be compared with the discrete eigenvalue directly.
    """
    u0 = np.asarray(u0, dtype=float)
    M = u0.size - 1
    a = discrete_mean(u0)
    v = u0 - a
    t_grid = np.linspace(0.0, T, samples + 1)
    step = t_grid[1]
    per = max(1, math.ceil(step / dt - 1e-9))
    norms = [float(np.sqrt(np.mean(v * v)))]
    for _ in range(samples):
        v = heat_neumann(v, step, M, step / per).values
        norms.append(float(np.sqrt(np.mean(v * v))))
    u = heat_neumann(u0, T, M, step / per)
    norms = np.array(norms)
    lam = discrete_neumann_eigenvalue(M)
    rate = float("nan")
    # stay well above the round-off floor of the conserved mean
    live = np.flatnonzero(norms > 1e-8 * norms[0])
    if live.size >= 2 and norms[0] > 0:
        i = live[-1]
        factor = norms[i] / norms[i - 1]
        # backward Euler multiplies mode j by 1 / (1 + h_t lambda_j) per step
        h_t = step / per
        rate = float((factor ** (-1.0 / per) - 1.0) / h_t)
    return HeatManifoldReport(
        mean=a,
        limit_error=float(np.max(np.abs(u.values - a))),
        mean_drift=abs(u.mean() - a),
        zero_mean_final=float(np.max(np.abs(v))),
        decomposition_error=float(np.max(np.abs(u.values - (a + v)))),
        decay_rate=rate,
        eigenvalue=lam,
        contraction=bool(np.all(np.diff(norms) <= 1e-15 * max(norms[0], 1.0))),
    )
