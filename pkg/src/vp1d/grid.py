"""Uniform phase-space and space-time grids.

Positions live on [-L, L], velocities on [-Vmax, Vmax], times on
[0, T_end].  Nx and Nv must be odd so that x = 0 and v = 0 are grid
nodes; several symmetry checks rely on that.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidParameter


def simpson_weights(n: int, h: float) -> np.ndarray:
    """Composite Simpson weights for n equally spaced nodes (n odd)."""
    if n < 3 or n % 2 == 0:
        raise InvalidParameter(f"Simpson rule needs an odd node count >= 3, got {n}")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


@dataclass(frozen=True)
class PhaseGrid:
    """Tensor grid for f(t, x, v) with uniform spacings in every direction."""

    L: float
    Nx: int
    Vmax: float
    Nv: int
    T_end: float
    Nt: int

    def __post_init__(self):
        problems = []
        if self.L <= 0:
            problems.append(f"L must be positive, got {self.L}")
        if self.Vmax <= 0:
            problems.append(f"Vmax must be positive, got {self.Vmax}")
        if self.T_end <= 0:
            problems.append(f"T_end must be positive, got {self.T_end}")
        if self.Nx < 3 or self.Nx % 2 == 0:
            problems.append(f"Nx must be odd and >= 3, got {self.Nx}")
        if self.Nv < 3 or self.Nv % 2 == 0:
            problems.append(f"Nv must be odd and >= 3, got {self.Nv}")
        if self.Nt < 2:
            problems.append(f"Nt must be >= 2, got {self.Nt}")
        if problems:
            raise InvalidParameter("; ".join(problems))

    @property
    def dx(self) -> float:
        return 2.0 * self.L / (self.Nx - 1)

    @property
    def dv(self) -> float:
        return 2.0 * self.Vmax / (self.Nv - 1)

    @property
    def dt(self) -> float:
        return self.T_end / (self.Nt - 1)

    @cached_property
    def x(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.Nx)

    @cached_property
    def v(self) -> np.ndarray:
        return np.linspace(-self.Vmax, self.Vmax, self.Nv)

    @cached_property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.T_end, self.Nt)

    @cached_property
    def v_weights(self) -> np.ndarray:
        """Simpson weights along the velocity axis (Nv is odd by construction)."""
        return simpson_weights(self.Nv, self.dv)

    def refined(self) -> "PhaseGrid":
        """Grid with every spacing halved (same physical extents)."""
        return PhaseGrid(self.L, 2 * (self.Nx - 1) + 1,
                         self.Vmax, 2 * (self.Nv - 1) + 1,
                         self.T_end, 2 * (self.Nt - 1) + 1)

    def with_horizon(self, t_end: float, nt: int) -> "PhaseGrid":
        """Same phase-space grid, different time axis."""
        return PhaseGrid(self.L, self.Nx, self.Vmax, self.Nv, t_end, nt)
