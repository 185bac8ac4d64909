"""Background and initial-data profiles.

The mobile species relaxes to a fixed ion background F(v) as |x| grows,
so the dynamical object is the perturbation g0 = F - f0.  The builtin
family is a quartic bump,

    F(v) = A_F * (W^2 - v^2)^4 / W^8   for |v| <= W,  0 otherwise,

the lowest-degree polynomial bump whose derivatives through third order
vanish at the support edge, so F is C^3 on the whole line.  Initial
perturbations are separable,

    g0(x, v) = A_g * R(x)^{-p} * phi(v),

with phi the same bump shape (support radius v_support, default W) and
R(x)^{-p} the spatial decay that all the solver's norms track.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, PositivityViolation
from .grid import PhaseGrid
from .norms import triple_norm, weight

BUMP_FAMILY = "quartic-bump"
SEPARABLE_SHAPE = "separable-quartic"


def _bump(v, radius):
    """(r^2 - v^2)^4 / r^8 inside |v| <= r, zero outside."""
    v = np.asarray(v, dtype=float)
    base = np.clip((radius - v) * (radius + v) / radius**2, 0.0, None)
    return base**4


def _bump_dv(v, radius):
    v = np.asarray(v, dtype=float)
    base = np.clip((radius - v) * (radius + v) / radius**2, 0.0, None)
    return -8.0 * v * base**3 / radius**2


def _bump_d2v(v, radius):
    v = np.asarray(v, dtype=float)
    base = np.clip((radius - v) * (radius + v) / radius**2, 0.0, None)
    return -8.0 * base**2 * (radius**2 - 7.0 * v * v) / radius**4


@dataclass(frozen=True)
class BackgroundProfile:
    """Fixed ion background F(v): nonnegative, supported on [-W, W], C^3."""

    W: float
    A_F: float
    family: str = BUMP_FAMILY
    edge_jump: float = 0.0  # measured third-derivative jump at the support edge

    def __call__(self, v):
        return self.A_F * _bump(v, self.W)

    def dv(self, v):
        return self.A_F * _bump_dv(v, self.W)

    def d2v(self, v):
        return self.A_F * _bump_d2v(v, self.W)


def make_background(W: float, A_F: float) -> BackgroundProfile:
    """Build the builtin background and verify smoothness at the support edge.

    The check compares one-sided third difference quotients just inside
    and just outside v = W (the outside one vanishes identically); the
    jump must stay below 1e-4 * A_F / W^3.
    """
    if W <= 0 or A_F <= 0:
        raise InvalidParameter(f"W and A_F must be positive, got W={W}, A_F={A_F}")
    bg = BackgroundProfile(W=W, A_F=A_F)
    h = W * 2.0**-27
    nodes = W - h * np.arange(4)
    vals = bg(nodes)
    # backward 3rd difference quotient at v = W, approaching from inside
    d3_in = (vals[0] - 3 * vals[1] + 3 * vals[2] - vals[3]) / h**3
    jump = abs(d3_in)  # outside estimate is exactly zero
    tol = 1e-4 * A_F / W**3
    if jump > tol:
        raise InvalidParameter(
            f"background is not C^3 at the support edge: jump {jump:.3e} > {tol:.3e}")
    return BackgroundProfile(W=W, A_F=A_F, edge_jump=float(jump))


@dataclass(frozen=True)
class ValidationReport:
    """Measured bounds recorded while validating initial data on a grid."""

    c_val: float          # max of (|g0| + |d_v g0|) R^p over nodes
    triple_norm0: float   # |||g0||| on the grid
    min_f0: float
    max_f0: float
    p_v: float            # measured velocity support radius of g0


@dataclass(frozen=True)
class InitialData:
    """Validated initial state f0 = F - g0 with its decay exponent."""

    background: BackgroundProfile
    A_g: float
    p: float
    v_support: float
    shape: str
    report: ValidationReport

    def g0(self, x, v):
        x = np.asarray(x, dtype=float)
        return self.A_g * weight(x) ** (-self.p) * _bump(v, self.v_support)

    def g0_dv(self, x, v):
        x = np.asarray(x, dtype=float)
        return self.A_g * weight(x) ** (-self.p) * _bump_dv(v, self.v_support)

    def f0(self, x, v):
        return self.background(v) - self.g0(x, v)


def make_initial_data(bg: BackgroundProfile, grid: PhaseGrid, A_g: float,
                      p: float, shape: str = SEPARABLE_SHAPE,
                      v_support: float | None = None) -> InitialData:
    """Construct initial data and validate its invariants on the grid.

    Raises PositivityViolation if f0 = F - g0 dips below zero at any
    node, and InvalidParameter for p <= 1 or an off-grid support radius.
    Negative A_g is allowed: f0 = F + |A_g| R^{-p} phi is then
    automatically nonnegative for the builtin shape.
    """
    if p <= 1.0:
        raise InvalidParameter(f"decay exponent p must exceed 1, got {p}")
    if shape != SEPARABLE_SHAPE:
        raise InvalidParameter(f"unknown perturbation shape {shape!r}")
    builtin_support = v_support is None
    pv = bg.W if builtin_support else float(v_support)
    if pv <= 0 or pv > grid.Vmax:
        raise InvalidParameter(
            f"v_support must lie in (0, Vmax={grid.Vmax}], got {pv}")

    candidate = InitialData(background=bg, A_g=A_g, p=p, v_support=pv,
                            shape=shape, report=None)

    xx = grid.x[:, None]
    vv = grid.v[None, :]
    g0 = candidate.g0(xx, vv)
    f0 = bg(vv) - g0
    min_f0 = float(np.min(f0))
    if min_f0 < 0.0:
        raise PositivityViolation(
            f"initial data is negative (min f0 = {min_f0:.3e}); "
            f"for the builtin shape this means |A_g| > A_F on the g0 > 0 side")

    rp = weight(grid.x) ** p
    c_val = float(np.max((np.abs(g0) + np.abs(candidate.g0_dv(xx, vv))) * rp[:, None]))
    tn0 = triple_norm(g0, grid, p)

    if builtin_support:
        p_v_measured = bg.W
    else:
        nonzero = np.max(np.abs(g0), axis=0) > 1e-14
        p_v_measured = float(np.max(np.abs(grid.v)[nonzero])) if np.any(nonzero) else 0.0

    report = ValidationReport(c_val=c_val, triple_norm0=tn0, min_f0=min_f0,
                              max_f0=float(np.max(f0)), p_v=p_v_measured)
    return InitialData(background=bg, A_g=A_g, p=p, v_support=pv,
                       shape=shape, report=report)
