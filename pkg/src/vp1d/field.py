"""Charge density and the electrostatic field on an unbounded line.

The net charge density is rho(t, x) = int (F(v) - f(t, x, v)) dv and the
field is the split prefix integral

    E(t, x) = 1/2 ( int_{-inf}^{x} rho dy  -  int_{x}^{inf} rho dy ).

The grid truncates the line at +-L, so the two improper integrals need a
closure.  In "powerlaw" mode rho is extended beyond the box as
rho(+-L) * (R(L)/R(y))^p, the decay the solver maintains everywhere
else, and the tail integrals are evaluated by adaptive quadrature of the
closed-form integrand.  A "zero" mode drops the tails; the difference
between modes is the reported truncation sensitivity.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from . import kernels
from .errors import InvalidParameter, InvalidProfile, OutOfRange
from .grid import PhaseGrid
from .norms import weight, weighted_sup
from .profiles import BackgroundProfile

TAIL_MODES = ("powerlaw", "zero")


@lru_cache(maxsize=None)
def tail_integral(L: float, p: float) -> float:
    """int_L^inf (1 + y^2)^(-p/2) dy by adaptive quadrature."""
    val, _ = quad(lambda y: (1.0 + y * y) ** (-0.5 * p), L, np.inf)
    return val


@lru_cache(maxsize=None)
def weight_integral(p: float) -> float:
    """int_R R(y)^{-p} dy (equals pi for p = 2)."""
    return 2.0 * tail_integral(0.0, p)


@dataclass(frozen=True)
class DensitySnapshot:
    """Net charge profile at one time, with its decay norm cached."""

    x: np.ndarray
    values: np.ndarray
    t: float
    p: float
    norm_p: float

    @classmethod
    def build(cls, x, values, t, p):
        return cls(x=x, values=values, t=t, p=p,
                   norm_p=weighted_sup(values, x, p))


def charge_density(f_slice: np.ndarray, bg: BackgroundProfile,
                   grid: PhaseGrid, p: float, t: float = 0.0) -> DensitySnapshot:
    """rho(x_j) = Simpson over v of (F(v) - f(x_j, v))."""
    f_slice = np.asarray(f_slice, dtype=float)
    if f_slice.shape != (grid.Nx, grid.Nv):
        raise InvalidProfile(f"snapshot shape {f_slice.shape} does not match grid")
    if not np.all(np.isfinite(f_slice)):
        raise InvalidProfile("phase-space snapshot contains non-finite values")
    g = bg(grid.v)[None, :] - f_slice
    rho = g @ grid.v_weights
    return DensitySnapshot.build(grid.x, rho, t, p)


def field_from_density(rho: np.ndarray, x: np.ndarray, p: float,
                       tail_mode: str = "powerlaw") -> np.ndarray:
    """Field values at the x-nodes from one density profile.

    E(x_j) = P(x_j) - M/2 with P the running prefix integral (trapezoid
    inside the box, tail integral below -L) and M the total integral
    including both tails.  By construction E(L) - E(-L) equals the
    trapezoid integral of rho over the box exactly.
    """
    if tail_mode not in TAIL_MODES:
        raise InvalidParameter(f"tail_mode must be one of {TAIL_MODES}")
    rho = np.asarray(rho, dtype=float)
    dx = x[1] - x[0]
    L = x[-1]
    prefix = np.concatenate(([0.0], np.cumsum(0.5 * dx * (rho[1:] + rho[:-1]))))
    if tail_mode == "powerlaw":
        rl_p = (1.0 + L * L) ** (0.5 * p)
        j_tail = tail_integral(float(L), float(p))
        t_neg = rho[0] * rl_p * j_tail
        t_pos = rho[-1] * rl_p * j_tail
    else:
        t_neg = t_pos = 0.0
    total = t_neg + prefix[-1] + t_pos
    return (t_neg + prefix) - 0.5 * total


class FieldHistory:
    """Field snapshots on the space-time grid with an evaluation contract.

    Interpolation is 4-point Lagrange cubic in x and linear in t; nodal
    queries reproduce stored values exactly.  Off-box queries return the
    boundary value plus the tail-model increment.  Instances are
    immutable once built and safe to share across threads.
    """

    def __init__(self, grid: PhaseGrid, E: np.ndarray, c_neg: np.ndarray,
                 c_pos: np.ndarray, p: float, tail_mode: str = "powerlaw"):
        E = np.ascontiguousarray(E, dtype=float)
        if E.shape != (grid.Nt, grid.Nx):
            raise InvalidParameter(f"field array shape {E.shape} does not match grid")
        if tail_mode not in TAIL_MODES:
            raise InvalidParameter(f"tail_mode must be one of {TAIL_MODES}")
        self.grid = grid
        self.E = E
        self.c_neg = np.ascontiguousarray(c_neg, dtype=float)
        self.c_pos = np.ascontiguousarray(c_pos, dtype=float)
        self.p = float(p)
        self.tail_mode = tail_mode
        self.E.setflags(write=False)

    @classmethod
    def from_densities(cls, grid: PhaseGrid, rho: np.ndarray, p: float,
                       tail_mode: str = "powerlaw") -> "FieldHistory":
        """Build the per-snapshot fields from density rows (Nt, Nx)."""
        rho = np.asarray(rho, dtype=float)
        E = np.empty_like(rho)
        for m in range(grid.Nt):
            E[m] = field_from_density(rho[m], grid.x, p, tail_mode)
        rl_p = (1.0 + grid.L**2) ** (0.5 * p)
        return cls(grid, E, rho[:, 0] * rl_p, rho[:, -1] * rl_p, p, tail_mode)

    @classmethod
    def from_values(cls, grid: PhaseGrid, E: np.ndarray,
                    tail_mode: str = "zero", p: float = 2.0) -> "FieldHistory":
        """History with given field values and clamped (zero-tail) closure."""
        nt = np.asarray(E).shape[0]
        return cls(grid, E, np.zeros(nt), np.zeros(nt), p, tail_mode)

    def kernel_args(self):
        """Positional argument pack consumed by the compiled kernels."""
        return (self.E, self.c_neg, self.c_pos, self.grid.dt,
                -self.grid.L, self.grid.dx, self.grid.L, self.p,
                1 if self.tail_mode == "powerlaw" else 0)

    def eval(self, t: float, x: float) -> float:
        """Interpolated field at one point; raises OutOfRange off the span."""
        if not (-1e-12 <= t <= self.grid.T_end * (1 + 1e-12) + 1e-12):
            raise OutOfRange(f"t={t} outside history span [0, {self.grid.T_end}]")
        return float(kernels.field_value(*self.kernel_args(), float(t), float(x)))

    def eval_many(self, ts: np.ndarray, xs: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        xs = np.asarray(xs, dtype=float)
        if np.any(ts < -1e-12) or np.any(ts > self.grid.T_end + 1e-12):
            raise OutOfRange("a query time lies outside the history span")
        return kernels.field_value_batch(*self.kernel_args(),
                                         np.ravel(ts), np.ravel(xs)).reshape(ts.shape)

    def max_abs_per_time(self) -> np.ndarray:
        """Per-snapshot sup of |E|, including the far-field tail limits."""
        m = np.max(np.abs(self.E), axis=1)
        if self.tail_mode == "powerlaw":
            j_tail = tail_integral(float(self.grid.L), self.p)
            far_pos = np.abs(self.E[:, -1] + self.c_pos * j_tail)
            far_neg = np.abs(self.E[:, 0] - self.c_neg * j_tail)
            m = np.maximum(m, np.maximum(far_pos, far_neg))
        return m

    def compat_error(self, rho: np.ndarray) -> float:
        """Max interior mismatch of centered d_x E against rho (all snapshots)."""
        dE = (self.E[:, 2:] - self.E[:, :-2]) / (2.0 * self.grid.dx)
        return float(np.max(np.abs(dE - np.asarray(rho)[:, 1:-1])))

    def impulse_bound(self) -> float:
        """Largest time integral of ||E(s)||_inf over [0, t] (trapezoid in s).

        The integrand is nonnegative, so this is the full-span integral;
        it bounds how far any characteristic velocity can drift.
        """
        m = self.max_abs_per_time()
        cum = np.cumsum(0.5 * self.grid.dt * (m[1:] + m[:-1]))
        return float(np.max(np.concatenate(([0.0], cum))))


def boundary_weighted_value(rho: np.ndarray, x: np.ndarray, p: float) -> float:
    """|rho| R^p at the box edge, reported so users can judge truncation."""
    return float(max(abs(rho[0]), abs(rho[-1])) * weight(x[-1]) ** p)
