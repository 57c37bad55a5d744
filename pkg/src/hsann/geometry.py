"""Star-shaped curves ``r = R_ref (1 + rho(theta))`` and the translation/dilation actions on them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hsann import harmonics as hm
from hsann.errors import GeometryBreakdown, InvalidDimension, OutOfChart, ShapeError
from hsann.harmonics import SurfaceCoeffs


@dataclass(frozen=True)
class SphereData:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))


@dataclass(frozen=True)
class RadialSurface:
    R_ref: float
    rho: SurfaceCoeffs
    n: int = 2

    def __post_init__(self):
        if self.n != 2:
            raise InvalidDimension("radial surfaces are implemented for n = 2")
        if self.R_ref <= 0:
            raise GeometryBreakdown("reference radius must be positive")

    @property
    def k_max(self) -> int:
        return self.rho.k_max

    def radius(self, theta, derivative: int = 0) -> np.ndarray:
        f = self.R_ref * hm.evaluate(self.rho, theta, derivative)
        return f + self.R_ref if derivative == 0 else f

    def grids(self, N: int):
        """``theta, f, f', f''`` on ``N`` uniform angles."""
        theta = hm.uniform_angles(N)
        f = self.R_ref * (1.0 + hm.synthesize(self.rho, N))
        fp = self.R_ref * hm.synthesize(self.rho, N, 1)
        fpp = self.R_ref * hm.synthesize(self.rho, N, 2)
        return theta, f, fp, fpp

    def default_grid(self) -> int:
        return max(256, 8 * (self.k_max + 1))


def _check_positive(f):
    if np.any(~np.isfinite(f)) or np.min(f) <= 0.0:
        raise GeometryBreakdown("radius function is not positive")


def curvature(f, fp, fpp) -> np.ndarray:
    """Curvature of ``r = f(theta)``; positive for convex curves, ``1/R`` on a circle."""
    f, fp, fpp = (np.asarray(a, dtype=float) for a in (f, fp, fpp))
    if not (f.shape == fp.shape == fpp.shape):
        raise ShapeError("grids must have equal shape")
    _check_positive(f)
    return (f * f + 2.0 * fp * fp - f * fpp) / (f * f + fp * fp) ** 1.5


def curvature_grid(s: RadialSurface, N: int, truncate: bool = True) -> np.ndarray:
    """Curvature on ``N`` angles, computed on a 2x padded grid and optionally truncated to ``k_max``."""
    _, f, fp, fpp = s.grids(2 * N)
    kappa = curvature(f, fp, fpp)
    if not truncate:
        return kappa[::2]
    return hm.synthesize(hm.analyze(kappa, s.k_max), N)


def surface_integral(g, f, fp, n: int = 2) -> float:
    """Trapezoid rule for the integral of ``g`` against arclength over the uniform mesh."""
    if n != 2:
        raise InvalidDimension("surface_integral is implemented for n = 2")
    g, f, fp = (np.asarray(a, dtype=float) for a in (g, f, fp))
    if not (g.shape == f.shape == fp.shape):
        raise ShapeError("grids must have equal length")
    N = f.shape[-1]
    return float(np.sum(g * np.sqrt(f * f + fp * fp), axis=-1) * (2.0 * np.pi / N))


def enclosed_volume(s: RadialSurface, N: int | None = None) -> float:
    N = N or s.default_grid()
    _, f, _, _ = s.grids(N)
    _check_positive(f)
    return float(0.5 * np.sum(f * f) * 2.0 * np.pi / N)


def surface_centroid(s: RadialSurface, N: int | None = None) -> np.ndarray:
    N = N or s.default_grid()
    theta, f, fp, _ = s.grids(N)
    _check_positive(f)
    return centroid_from_grid(theta, f, fp)


def centroid_from_grid(theta, f, fp) -> np.ndarray:
    w = np.sqrt(f * f + fp * fp)
    length = np.sum(w)
    return np.array([np.sum(f * np.cos(theta) * w), np.sum(f * np.sin(theta) * w)]) / length


def shift_radius(s: RadialSurface, z, theta, tol: float = 1e-12, max_iter: int = 60) -> np.ndarray:
    """Radius along the rays ``theta`` of the translated curve ``s + z``.

    Solves ``|r w - z| = f(arg(r w - z))`` per ray by Newton's method with a
    bisection safeguard, starting from the unshifted radius.
    """
    z = np.asarray(z, dtype=float)
    theta = np.asarray(theta, dtype=float)
    R = s.R_ref
    c = s.rho.coeffs
    k_max = s.k_max
    ct, st = np.cos(theta), np.sin(theta)

    def g_and_dg(r):
        x = r * ct - z[0]
        y = r * st - z[1]
        dist = np.hypot(x, y)
        phi = np.arctan2(y, x)
        f = R * (1.0 + hm.evaluate(c, phi, 0, k_max))
        fp = R * hm.evaluate(c, phi, 1, k_max)
        # d(dist)/dr and d(phi)/dr along the ray
        ddist = (x * ct + y * st) / dist
        dphi = (x * st - y * ct) / (dist * dist)
        return dist - f, ddist - fp * dphi, dist

    f0 = R * (1.0 + hm.evaluate(c, theta, 0, k_max))
    if np.min(f0) <= 0:
        raise GeometryBreakdown("radius function is not positive")
    zn = float(np.hypot(*z))
    # the origin must stay strictly inside the translated curve
    if zn >= R * (1.0 + hm.evaluate(c, np.arctan2(-z[1], -z[0]), 0, k_max)):
        raise GeometryBreakdown("translated curve no longer encloses the origin")
    lo = np.zeros_like(theta)
    hi = np.full_like(theta, np.max(f0) + 2 * zn + R)
    r = f0.copy()
    for _ in range(max_iter):
        g, dg, _ = g_and_dg(r)
        lo = np.where(g < 0, r, lo)
        hi = np.where(g > 0, r, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = g / dg
        r_new = r - step
        bad = ~np.isfinite(r_new) | (r_new <= lo) | (r_new >= hi) | (dg <= 0)
        r_new = np.where(bad, 0.5 * (lo + hi), r_new)
        done = np.abs(r_new - r) <= tol * max(R, 1.0)
        r = r_new
        if np.all(done):
            break
    g, dg, _ = g_and_dg(r)
    if np.any(~np.isfinite(r)) or np.max(np.abs(g)) > 1e3 * tol * max(R, 1.0) or np.any(dg <= 0):
        raise GeometryBreakdown("translated curve is no longer star-shaped about the origin")
    return r


def translate_resample(s: RadialSurface, z, N: int | None = None) -> RadialSurface:
    """The curve ``s + z`` re-expressed as a radial graph over the same reference radius."""
    z = np.asarray(z, dtype=float)
    if z.shape != (2,):
        raise ShapeError("translation must be a 2-vector")
    if not np.any(z):
        return s
    N = N or s.default_grid()
    r = shift_radius(s, z, hm.uniform_angles(N))
    rho = hm.analyze(r / s.R_ref - 1.0, s.k_max)
    return RadialSurface(s.R_ref, rho, s.n)


def dilate(s: RadialSurface, lam: float) -> RadialSurface:
    """``lam * s`` in the same chart: ``1 + rho_new = lam * (1 + rho)``."""
    if not lam > 0:
        raise ValueError("dilation factor must be positive")
    c = lam * np.asarray(s.rho.coeffs)
    c[0] += lam - 1.0
    rho = SurfaceCoeffs(s.k_max, c)
    if rho.sup_norm(s.default_grid()) >= 1.0:
        raise OutOfChart(f"dilation by {lam} leaves the chart (sup |rho| >= 1)")
    return RadialSurface(s.R_ref, rho, s.n)


def rechart(s: RadialSurface, R_new: float) -> RadialSurface:
    """Same point set expressed relative to another reference radius."""
    c = np.asarray(s.rho.coeffs) * (s.R_ref / R_new)
    c[0] += s.R_ref / R_new - 1.0
    return RadialSurface(R_new, SurfaceCoeffs(s.k_max, c), s.n)


def curvature_linearization_symbol(k: int, radius: float, n: int = 2) -> float:
    """First-order change of mean curvature per unit relative perturbation in mode ``k``."""
    if n < 2:
        raise InvalidDimension(f"n must be >= 2, got {n}")
    return (hm.mode_eigenvalue(k, n) - (n - 1)) / ((n - 1) * radius)
