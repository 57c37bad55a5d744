"""Physical constants and numerical controls shared by every solver."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from hsann.errors import ConfigError, InvalidDimension


@dataclass(frozen=True)
class ProblemParams:
    """Outer tension ``gamma``, inner tension ``mu`` (``0 < mu < gamma``), reference radius ``R``.

    The stationary inner radius follows from ``gamma / R = mu / K``.
    ``k_u`` is the Laurent degree of the elliptic solver (defaults to ``k_max``).
    """

    n: int = 2
    gamma: float = 1.0
    mu: float = 0.5
    R: float = 1.0
    k_max: int = 32
    n_theta: int = 256
    k_u: int | None = None
    over_collocation: float = 2.0
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    fd_step: float = 1e-6
    stat_tol: float = 1e-9
    step_tol: float = 1e-8
    dt_min: float = 1e-10

    def __post_init__(self):
        if self.n < 2:
            raise InvalidDimension(f"n must be >= 2, got {self.n}")
        if not (0.0 < self.mu < self.gamma):
            raise ConfigError("mu must be < gamma (and positive)")
        if self.R <= 0:
            raise ConfigError("R must be positive")
        if self.k_max < 2:
            raise ConfigError("k_max must be >= 2")
        if self.n_theta < 4 * (self.k_max + 1):
            raise ConfigError("n_theta must be >= 4*(k_max+1)")
        for name in ("newton_tol", "stat_tol", "step_tol", "fd_step", "over_collocation"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")

    @property
    def K(self) -> float:
        return self.mu / self.gamma * self.R

    @property
    def ku(self) -> int:
        return self.k_max if self.k_u is None else self.k_u

    @property
    def pressure(self) -> float:
        """Stationary pressure ``gamma / R`` (equal to ``mu / K``)."""
        return self.gamma / self.R

    def replace(self, **changes) -> ProblemParams:
        return dataclasses.replace(self, **changes)

    def require_planar(self):
        if self.n != 2:
            raise InvalidDimension("nonlinear geometry and evolution are implemented for n = 2 only")
