"""Harmonic basis on the unit sphere.

Eigenvalues and multiplicities of the Laplace-Beltrami operator are available
for every ambient dimension.  Grid transforms exist for n = 2 only, where the
basis is ``1, cos(k t), sin(k t)`` with raw (not L2-normalised) amplitudes.

Coefficient layout for n = 2 is ``[a0, a1, b1, a2, b2, ...]`` so that mode
``(k, 1)`` is the cosine and ``(k, 2)`` the sine of degree ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from hsann.errors import AliasingRiskError, InvalidDimension, ShapeError


def mode_eigenvalue(k: int, n: int) -> int:
    if n < 2:
        raise InvalidDimension(f"n must be >= 2, got {n}")
    if k < 0:
        raise ValueError("degree must be nonnegative")
    return k * k + (n - 2) * k


def mode_multiplicity(k: int, n: int) -> int:
    if n < 2:
        raise InvalidDimension(f"n must be >= 2, got {n}")
    if k < 0:
        raise ValueError("degree must be nonnegative")
    if k == 0:
        return 1
    if k == 1:
        return n
    return comb(n + k - 1, k) - comb(n + k - 3, k - 2)


@dataclass(frozen=True, order=True)
class ModeIndex:
    k: int
    l: int = 1

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("degree must be nonnegative")
        d = 1 if self.k == 0 else 2
        if not 1 <= self.l <= d:
            raise ValueError(f"l must lie in [1, {d}] for k={self.k}")

    @property
    def index(self) -> int:
        return 0 if self.k == 0 else 2 * self.k - 1 + (self.l - 1)


def n_coeffs(k_max: int) -> int:
    return 2 * k_max + 1


def mode_degrees(k_max: int) -> np.ndarray:
    """Degree ``k`` of every slot in the coefficient layout."""
    deg = np.zeros(n_coeffs(k_max), dtype=int)
    deg[1::2] = np.arange(1, k_max + 1)
    deg[2::2] = np.arange(1, k_max + 1)
    return deg


class SurfaceCoeffs:
    """Truncated cos/sin coefficient vector of a function on the circle."""

    __slots__ = ("k_max", "coeffs")

    def __init__(self, k_max: int, coeffs=None):
        k_max = int(k_max)
        if coeffs is None:
            arr = np.zeros(n_coeffs(k_max))
        else:
            arr = np.array(coeffs, dtype=float)
            if arr.shape != (n_coeffs(k_max),):
                raise ShapeError(f"expected {n_coeffs(k_max)} coefficients for k_max={k_max}, got {arr.shape}")
        arr.setflags(write=False)
        self.k_max = k_max
        self.coeffs = arr

    @classmethod
    def zeros(cls, k_max: int) -> SurfaceCoeffs:
        return cls(k_max)

    @classmethod
    def from_modes(cls, k_max: int, modes: dict) -> SurfaceCoeffs:
        """Build from ``{(k, l): amplitude}`` or ``{ModeIndex: amplitude}``."""
        arr = np.zeros(n_coeffs(k_max))
        for key, value in modes.items():
            m = key if isinstance(key, ModeIndex) else ModeIndex(*key)
            if m.k > k_max:
                raise ValueError(f"mode {m} exceeds k_max={k_max}")
            arr[m.index] += value
        return cls(k_max, arr)

    def __getitem__(self, key) -> float:
        m = key if isinstance(key, ModeIndex) else ModeIndex(*key)
        if m.k > self.k_max:
            return 0.0
        return float(self.coeffs[m.index])

    def __len__(self):
        return len(self.coeffs)

    def __iter__(self):
        for k in range(self.k_max + 1):
            for l in ((1,) if k == 0 else (1, 2)):
                m = ModeIndex(k, l)
                yield m, float(self.coeffs[m.index])

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, SurfaceCoeffs):
            if other.k_max != self.k_max:
                raise ShapeError("k_max mismatch")
            return other.coeffs
        return np.asarray(other, dtype=float)

    def __add__(self, other):
        return SurfaceCoeffs(self.k_max, self.coeffs + self._coerce(other))

    def __sub__(self, other):
        return SurfaceCoeffs(self.k_max, self.coeffs - self._coerce(other))

    def __mul__(self, scalar):
        return SurfaceCoeffs(self.k_max, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return SurfaceCoeffs(self.k_max, -self.coeffs)

    def __eq__(self, other):
        return isinstance(other, SurfaceCoeffs) and self.k_max == other.k_max and np.array_equal(self.coeffs, other.coeffs)

    def __repr__(self):
        nz = {(m.k, m.l): v for m, v in self if v != 0.0}
        return f"SurfaceCoeffs(k_max={self.k_max}, nonzero={nz})"

    def sup_norm(self, n_grid: int | None = None) -> float:
        n_grid = n_grid or 4 * (self.k_max + 1)
        return float(np.max(np.abs(synthesize(self, n_grid))))

    def truncate(self, k_max: int) -> SurfaceCoeffs:
        out = np.zeros(n_coeffs(k_max))
        m = min(len(out), len(self.coeffs))
        out[:m] = self.coeffs[:m]
        return SurfaceCoeffs(k_max, out)


def uniform_angles(n: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n) / n


@lru_cache(maxsize=64)
def _cached_matrix(k_max: int, n: int, derivative: int) -> np.ndarray:
    mat = basis_matrix(k_max, uniform_angles(n), derivative)
    mat.setflags(write=False)
    return mat


def basis_matrix(k_max: int, theta, derivative: int = 0) -> np.ndarray:
    """Evaluation matrix of the basis (or its ``derivative``-th angular derivative) at ``theta``."""
    theta = np.asarray(theta, dtype=float)
    k = np.arange(1, k_max + 1)
    kt = np.outer(theta, k)
    c, s = np.cos(kt), np.sin(kt)
    # d/dt cos = -k sin, d/dt sin = k cos; cycle of period 4
    p = derivative % 4
    scale = k.astype(float) ** derivative
    if p == 0:
        cc, ss = c, s
    elif p == 1:
        cc, ss = -s, c
    elif p == 2:
        cc, ss = -c, -s
    else:
        cc, ss = s, -c
    mat = np.empty((theta.size, n_coeffs(k_max)))
    mat[:, 0] = 1.0 if derivative == 0 else 0.0
    mat[:, 1::2] = cc * scale
    mat[:, 2::2] = ss * scale
    return mat


def evaluate(c: SurfaceCoeffs | np.ndarray, theta, derivative: int = 0, k_max: int | None = None) -> np.ndarray:
    """Pointwise evaluation at arbitrary angles."""
    arr = c.coeffs if isinstance(c, SurfaceCoeffs) else np.asarray(c)
    k_max = (len(arr) - 1) // 2 if k_max is None else k_max
    return basis_matrix(k_max, theta, derivative) @ arr


def synthesize(c: SurfaceCoeffs | np.ndarray, N: int, derivative: int = 0) -> np.ndarray:
    """Values of the expansion on ``N`` uniform angles ``2 pi j / N``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    arr = c.coeffs if isinstance(c, SurfaceCoeffs) else np.asarray(c)
    k_max = (len(arr) - 1) // 2
    return _cached_matrix(k_max, N, derivative) @ arr


def analyze_array(grid, k_max: int) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    N = grid.shape[-1]
    if N < 4 * (k_max + 1):
        raise AliasingRiskError(f"grid of {N} points cannot safely resolve k_max={k_max}; need >= {4 * (k_max + 1)}")
    if not np.all(np.isfinite(grid)):
        raise ValueError("grid values must be finite")
    spec = np.fft.rfft(grid, axis=-1) / N
    out = np.empty(grid.shape[:-1] + (n_coeffs(k_max),))
    out[..., 0] = spec[..., 0].real
    out[..., 1::2] = 2.0 * spec[..., 1 : k_max + 1].real
    out[..., 2::2] = -2.0 * spec[..., 1 : k_max + 1].imag
    return out


def analyze(grid, k_max: int) -> SurfaceCoeffs:
    """Coefficients of the trigonometric interpolant of ``grid``, truncated at ``k_max``."""
    return SurfaceCoeffs(k_max, analyze_array(grid, k_max))


def laplace_beltrami(c: SurfaceCoeffs, n: int = 2) -> SurfaceCoeffs:
    """Multiply every degree-``k`` slot by ``-lambda_k(n)``.

    The cos/sin layout only spans the circle, but the operator is diagonal in
    the degree, so the same vector can carry degree-wise data for any ``n``.
    """
    if n < 2:
        raise InvalidDimension(f"n must be >= 2, got {n}")
    lam = np.array([mode_eigenvalue(int(k), n) for k in mode_degrees(c.k_max)], dtype=float)
    return SurfaceCoeffs(c.k_max, -lam * c.coeffs)
