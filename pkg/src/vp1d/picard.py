"""Fixed-point transport iteration and the continuation loop.

One sweep of the map takes an iterate f with its self-consistent field
E, transports every grid node backward along the characteristics of E,
and reads the initial data at the foot:

    f_new(t, x, v) = f0(X(0; t, x, v), V(0; t, x, v)).

Iterating from the frozen start f(t) = f0 contracts the density
sequence super-geometrically: the distances

    d_k = sup_t || (rho_{k+1} - rho_k)(t) ||_p

shrink like (c * T)^k / k! and the iteration stops once d_k drops below
tol * max(1, d_0).  Because f_new is an exact pullback of f0 (the
initial data is evaluated analytically, never interpolated), every
iterate inherits the range of f0 up to integrator error.

Continuation re-bases time: a finished segment on [0, T] becomes the
initial data of a fresh solve on [0, delta] whose "initial slice" is
evaluated by flowing queries backward through the stored field of the
finished segment, so the interior history is never re-interpolated.
"""
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .characteristics import flow_backward_batch
from .errors import ContinuationRefused, InvalidParameter, NonConvergence
from .field import DensitySnapshot, FieldHistory
from .grid import PhaseGrid
from .norms import triple_norm, weight
from .profiles import BackgroundProfile, InitialData

D_FLOOR = 1e-13  # distances below this are treated as roundoff for fits


@dataclass
class DuhamelParts:
    """Side products of one map sweep used by the residual diagnostics.

    rho0_flow[m, j] = Simpson_v of g0(X(0), V(0)) at node (t_m, x_j);
    ef_int[m, j]    = Simpson_v of the path integral of E(s, X) F'(V),
                      accumulated by a trapezoid over substep boundaries
                      (independent of the transport quadrature).
    """

    rho0_flow: np.ndarray
    ef_int: np.ndarray


@dataclass
class SolutionHistory:
    """One iterate (or the converged solution) sampled on the full grid."""

    grid: PhaseGrid
    p: float
    background: BackgroundProfile
    f: np.ndarray           # (Nt, Nx, Nv)
    rho: np.ndarray         # (Nt, Nx)
    rho_norms: np.ndarray   # (Nt,)
    field: FieldHistory
    origin: str
    meta: dict = dc_field(default_factory=dict)
    duhamel: DuhamelParts | None = None

    def g(self, m: int) -> np.ndarray:
        """Perturbation snapshot F(v) - f(t_m) on the phase grid."""
        return self.background(self.grid.v)[None, :] - self.f[m]

    def density(self, m: int) -> DensitySnapshot:
        return DensitySnapshot(x=self.grid.x, values=self.rho[m],
                               t=float(self.grid.t[m]), p=self.p,
                               norm_p=float(self.rho_norms[m]))

    def triple_norm_per_time(self) -> np.ndarray:
        return np.array([triple_norm(self.g(m), self.grid, self.p)
                         for m in range(self.grid.Nt)])


@dataclass
class IterationTrace:
    """Per-sweep convergence bookkeeping of one solve."""

    distances: list          # d_k, starting at k = 0
    ratios: list             # r_k = d_{k+1} / d_k
    c1: list                 # field impulse bound of each new iterate
    triple_norms: list       # per-iterate array of |||g(t_m)||| over time nodes
    converged: bool
    iterations: int
    tol: float
    fitted_c3: float | None = None


def fit_contraction(distances, horizon: float):
    """Fit d_k ~ C (c3 * horizon)^k / k! and return (c3, per_iteration_ratio).

    Uses k >= 1 entries above the roundoff floor; returns (None, None)
    when fewer than two usable points exist.
    """
    ks = [k for k, d in enumerate(distances) if k >= 1 and d > D_FLOOR]
    if len(ks) < 2:
        return None, None
    ys = [math.log(distances[k]) + math.lgamma(k + 1) for k in ks]
    slope = np.polyfit(np.array(ks, dtype=float), np.array(ys), 1)[0]
    per_iter = float(np.exp(slope))
    return per_iter / horizon, per_iter


def _density_rows(f_slice, bg_v, wv):
    return (bg_v[None, :] - f_slice) @ wv


def initial_history(data: InitialData, grid: PhaseGrid,
                    tail_mode: str = "powerlaw") -> SolutionHistory:
    """Iterate 0: f frozen at the initial data for all times."""
    f0_nodes = data.f0(grid.x[:, None], grid.v[None, :])
    bg_v = data.background(grid.v)
    rho0 = _density_rows(f0_nodes, bg_v, grid.v_weights)
    f = np.broadcast_to(f0_nodes, (grid.Nt, grid.Nx, grid.Nv)).copy()
    rho = np.broadcast_to(rho0, (grid.Nt, grid.Nx)).copy()
    fld = FieldHistory.from_densities(grid, rho, data.p, tail_mode)
    norm0 = float(np.max(np.abs(rho0) * weight(grid.x) ** data.p))
    return SolutionHistory(grid=grid, p=data.p, background=data.background,
                           f=f, rho=rho,
                           rho_norms=np.full(grid.Nt, norm0),
                           field=fld, origin="iterate-0")


def apply_map(hist: SolutionHistory, data, substeps: int = 4,
              with_residual: bool = False) -> SolutionHistory:
    """One sweep: transport every node through hist's field, then rebuild
    the density and field of the result.

    The output at t = 0 is the initial data exactly.  When
    with_residual is set, the sweep also accumulates the pieces of the
    density reconstruction identity

        rho_new(t, x) = rho0_flow(t, x) - ef_int(t, x)

    (see DuhamelParts) so diagnostics can measure its defect.
    """
    grid = hist.grid
    bg = hist.background
    bg_v = bg(grid.v)
    wv = grid.v_weights
    xx = np.repeat(grid.x, grid.Nv)
    vv = np.tile(grid.v, grid.Nx)

    f_new = np.empty((grid.Nt, grid.Nx, grid.Nv))
    rho = np.empty((grid.Nt, grid.Nx))
    f0_nodes = data.f0(grid.x[:, None], grid.v[None, :])
    f_new[0] = f0_nodes
    rho[0] = _density_rows(f0_nodes, bg_v, wv)
    if with_residual:
        rho0_flow = np.empty_like(rho)
        ef_int = np.zeros_like(rho)
        rho0_flow[0] = rho[0]

    left_nodes = 0
    for m in range(1, grid.Nt):
        x0, v0, _, efq, left = flow_backward_batch(
            float(grid.t[m]), xx, vv, hist.field, substeps,
            bg_amp=bg.A_F, bg_rad=bg.W, want_quad=with_residual)
        fm_flat = data.f0(x0, v0)
        fm = fm_flat.reshape(grid.Nx, grid.Nv)
        f_new[m] = fm
        rho[m] = _density_rows(fm, bg_v, wv)
        left_nodes += int(np.sum(left))
        if with_residual:
            g0_end = (bg(v0) - fm_flat).reshape(grid.Nx, grid.Nv)
            rho0_flow[m] = g0_end @ wv
            ef_int[m] = efq.reshape(grid.Nx, grid.Nv) @ wv

    fld = FieldHistory.from_densities(grid, rho, hist.p, hist.field.tail_mode)
    rp = weight(grid.x) ** hist.p
    norms = np.max(np.abs(rho) * rp[None, :], axis=1)
    meta = {"left_box_fraction": left_nodes / max(1, (grid.Nt - 1) * grid.Nx * grid.Nv)}
    return SolutionHistory(grid=grid, p=hist.p, background=bg, f=f_new,
                           rho=rho, rho_norms=norms, field=fld,
                           origin="mapped", meta=meta,
                           duhamel=DuhamelParts(rho0_flow, ef_int)
                           if with_residual else None)


def solve(data, grid: PhaseGrid, tol: float = 1e-10, max_iters: int = 25,
          substeps: int = 4, tail_mode: str = "powerlaw"):
    """Iterate the map from the frozen start until the density settles.

    Returns (solution, trace).  Raises NonConvergence (carrying both)
    when max_iters sweeps are exhausted, which is the numerical symptom
    of a horizon too long for the contraction to bite.
    """
    if tol <= 0:
        raise InvalidParameter(f"tol must be positive, got {tol}")
    if max_iters < 1:
        raise InvalidParameter(f"max_iters must be >= 1, got {max_iters}")

    hist = initial_history(data, grid, tail_mode)
    rp = weight(grid.x) ** data.p
    distances, c1, triples = [], [], []
    converged = False
    for k in range(max_iters):
        new = apply_map(hist, data, substeps)
        d_k = float(np.max(np.abs(new.rho - hist.rho) * rp[None, :]))
        distances.append(d_k)
        c1.append(new.field.impulse_bound())
        triples.append(new.triple_norm_per_time())
        new.origin = f"iterate-{k + 1}"
        hist = new
        if d_k < tol * max(1.0, distances[0]):
            converged = True
            break

    ratios = [distances[i + 1] / distances[i] if distances[i] > 0 else 0.0
              for i in range(len(distances) - 1)]
    c3, _ = fit_contraction(distances, grid.T_end)
    trace = IterationTrace(distances=distances, ratios=ratios, c1=c1,
                           triple_norms=triples, converged=converged,
                           iterations=len(distances), tol=tol, fitted_c3=c3)
    if not converged:
        raise NonConvergence(
            f"no convergence in {max_iters} sweeps (last d_k = {distances[-1]:.3e}); "
            f"the horizon is likely too long for the contraction",
            trace=trace, history=hist)
    hist.origin = "converged"
    return hist, trace


class FlowedInitialData:
    """Initial slice of a continuation segment.

    Evaluates f at the seam time T of a finished segment by flowing the
    query point backward through the segment's stored field and reading
    the original initial data there, so no grid interpolation of the
    interior history is involved.
    """

    def __init__(self, base_data, base_hist: SolutionHistory, substeps: int = 4):
        self.base_data = base_data
        self.base_hist = base_hist
        self.substeps = substeps
        self.background = base_data.background
        self.p = base_data.p
        self.seam_time = float(base_hist.grid.T_end)

    def f0(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        shape = np.broadcast_shapes(x.shape, v.shape)
        xb = np.ascontiguousarray(np.broadcast_to(x, shape).ravel())
        vb = np.ascontiguousarray(np.broadcast_to(v, shape).ravel())
        x0, v0, _, _, _ = flow_backward_batch(
            self.seam_time, xb, vb, self.base_hist.field, self.substeps)
        return self.base_data.f0(x0, v0).reshape(shape)

    def g0(self, x, v):
        return self.background(np.asarray(v, dtype=float)) - self.f0(x, v)


def extend(sol: SolutionHistory, data, delta: float, tol: float = 1e-10,
           norm_cap: float = np.inf, max_iters: int = 25, substeps: int = 4):
    """Continue a finished solve on [0, T] to [0, T + delta].

    Refuses (ContinuationRefused) when the monitored combined norm
    sup_t |||g(t)||| on [0, T] exceeds norm_cap; the same norm is
    re-measured on the extension and recorded in the result metadata.
    delta must be a positive multiple of the segment's time step so the
    concatenated history stays uniform.
    """
    grid = sol.grid
    monitored = float(np.max(sol.triple_norm_per_time()))
    if monitored > norm_cap:
        raise ContinuationRefused(
            f"monitored norm {monitored:.6e} exceeds cap {norm_cap:.6e} "
            f"at the seam time; not extending")

    n_ext = int(round(delta / grid.dt))
    if n_ext < 1 or abs(n_ext * grid.dt - delta) > 1e-9 * grid.dt:
        raise InvalidParameter(
            f"delta={delta} must be a positive multiple of dt={grid.dt}")

    ext_grid = grid.with_horizon(n_ext * grid.dt, n_ext + 1)
    seam_data = FlowedInitialData(data, sol, substeps)
    ext_sol, ext_trace = solve(seam_data, ext_grid, tol, max_iters, substeps,
                               tail_mode=sol.field.tail_mode)

    big_grid = grid.with_horizon(grid.T_end + ext_grid.T_end, grid.Nt + n_ext)
    f = np.concatenate([sol.f, ext_sol.f[1:]], axis=0)
    rho = np.concatenate([sol.rho, ext_sol.rho[1:]], axis=0)
    fld = FieldHistory.from_densities(big_grid, rho, sol.p, sol.field.tail_mode)
    ext_norm = float(np.max(ext_sol.triple_norm_per_time()))
    meta = dict(sol.meta)
    meta.update(extension_norm=ext_norm,
                extension_norm_ok=bool(ext_norm <= norm_cap),
                seam_time=float(grid.T_end))
    combined = SolutionHistory(
        grid=big_grid, p=sol.p, background=sol.background, f=f, rho=rho,
        rho_norms=np.concatenate([sol.rho_norms, ext_sol.rho_norms[1:]]),
        field=fld, origin="extended", meta=meta)
    return combined, ext_trace
