"""Weighted decay norms on spatial profiles and phase-space snapshots.

The spatial weight is R(x) = sqrt(1 + x^2).  A profile sigma(x) is
measured with the decay norm

    ||sigma||_p = sup_x |sigma(x)| R(x)^p,

which is finite exactly when sigma falls off at least like R^{-p}.
Phase-space snapshots h(x, v) get the combined norm

    |||h||| = ||h||_inf + ||d_v h||_inf + ||d_x h||_p + ||int h dv||_p

whose boundedness over time is the solver's continuation criterion.
All sups here are grid sups: the true supremum over the line is
approximated by the maximum over grid nodes, and the boundary-node
weighted value is surfaced in run reports so a user can tell whether
the sup was attained in the interior.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, InvalidProfile
from .grid import PhaseGrid


def weight(x):
    """Spatial weight R(x) = sqrt(1 + x^2); even, >= 1, increasing in |x|."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + x * x)


@dataclass(frozen=True)
class WeightedProfile:
    """A profile sampled on x-nodes together with its decay exponent p > 1."""

    x: np.ndarray
    values: np.ndarray
    p: float

    def __post_init__(self):
        if self.p <= 1.0:
            raise InvalidParameter(f"decay exponent p must exceed 1, got {self.p}")
        if self.x.shape != self.values.shape:
            raise InvalidParameter("x and values must have matching shapes")


def weighted_sup(values, x, p: float) -> float:
    """max over nodes of |values| * R(x)^p."""
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise InvalidProfile("profile contains non-finite values")
    return float(np.max(np.abs(values) * weight(x) ** p))


def weighted_sup_norm(sigma: WeightedProfile) -> float:
    """Decay norm ||sigma||_p of a weighted profile."""
    return weighted_sup(sigma.values, sigma.x, sigma.p)


def triple_norm(g: np.ndarray, grid: PhaseGrid, p: float) -> float:
    """Combined norm |||g||| of a phase-space snapshot g on the grid.

    Derivatives use 2nd-order centered differences (one-sided at the
    edges); the v-integral uses composite Simpson.  The ||d_x g||_p term
    takes the sup over both x and v of |d_x g| R(x)^p.
    """
    g = np.asarray(g, dtype=float)
    if g.shape != (grid.Nx, grid.Nv):
        raise InvalidProfile(f"snapshot shape {g.shape} does not match grid "
                             f"({grid.Nx}, {grid.Nv})")
    if not np.all(np.isfinite(g)):
        raise InvalidProfile("snapshot contains non-finite values")

    sup_g = float(np.max(np.abs(g)))
    dg_dv = np.gradient(g, grid.dv, axis=1, edge_order=2)
    sup_dv = float(np.max(np.abs(dg_dv)))

    dg_dx = np.gradient(g, grid.dx, axis=0, edge_order=2)
    rp = weight(grid.x) ** p
    sup_dx_p = float(np.max(np.abs(dg_dx) * rp[:, None]))

    integral_v = g @ grid.v_weights
    sup_int_p = float(np.max(np.abs(integral_v) * rp))

    return sup_g + sup_dv + sup_dx_p + sup_int_p
