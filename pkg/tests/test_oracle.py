import numpy as np
import pytest

import vp1d
from vp1d.oracle import OracleConfig, splitting_solve


def test_trivial_background_is_static(background, small_grid):
    data = vp1d.make_initial_data(background, small_grid, A_g=0.0, p=2.0)
    sol = splitting_solve(data, OracleConfig(grid=small_grid))
    f_bg = np.tile(background(small_grid.v), (small_grid.Nx, 1))
    assert np.max(np.abs(sol.f - f_bg[None])) == 0.0
    assert np.max(np.abs(sol.rho)) == 0.0


def test_forced_free_streaming(background):
    # field switched off: the result must be f0(x - t v, v) up to the
    # accumulated cubic interpolation error
    grid = vp1d.PhaseGrid(L=20.0, Nx=201, Vmax=4.0, Nv=65, T_end=0.4, Nt=21)
    data = vp1d.make_initial_data(background, grid, A_g=0.05, p=2.0)
    sol = splitting_solve(data, OracleConfig(grid=grid, force_zero_field=True))
    xx = grid.x[:, None] - grid.T_end * grid.v[None, :]
    expected = data.f0(xx, grid.v[None, :])
    interp_budget = grid.dx**4 * (grid.Nt - 1) * 10.0
    assert np.max(np.abs(sol.f[-1] - expected)) <= interp_budget


def test_free_streaming_error_shrinks(background):
    errs = []
    for nx, nt in ((101, 11), (201, 21)):
        grid = vp1d.PhaseGrid(L=20.0, Nx=nx, Vmax=4.0, Nv=65, T_end=0.4, Nt=nt)
        data = vp1d.make_initial_data(background, grid, A_g=0.05, p=2.0)
        sol = splitting_solve(data, OracleConfig(grid=grid,
                                                 force_zero_field=True))
        xx = grid.x[:, None] - grid.T_end * grid.v[None, :]
        errs.append(np.max(np.abs(sol.f[-1] - data.f0(xx, grid.v[None, :]))))
    assert errs[0] / errs[1] > 4.0  # ~dx^4/steps => factor 8 per halving


def test_range_overshoot_monitored(background):
    grid = vp1d.PhaseGrid(L=20.0, Nx=201, Vmax=4.0, Nv=65, T_end=0.5, Nt=26)
    data = vp1d.make_initial_data(background, grid, A_g=0.05, p=2.0)
    sol = splitting_solve(data, OracleConfig(grid=grid))
    f0_max = float(np.max(sol.f[0]))
    assert sol.meta["range_overshoot"] <= 1e-3 * f0_max
    assert sol.meta["cfl_ratio"] == pytest.approx(
        grid.Vmax * grid.dt / grid.dx)


def test_oracle_vs_picard_under_refinement(background):
    # simultaneous halving must shrink the cross-solver gap by >= 3x
    diffs = []
    for nx, nv, nt in ((101, 33, 13), (201, 65, 25)):
        grid = vp1d.PhaseGrid(L=20.0, Nx=nx, Vmax=4.0, Nv=nv, T_end=0.5, Nt=nt)
        data = vp1d.make_initial_data(background, grid, A_g=0.05, p=2.0)
        sp, _ = vp1d.solve(data, grid, tol=1e-10)
        so = splitting_solve(data, OracleConfig(grid=grid))
        diffs.append(float(np.max(np.abs(sp.f - so.f))))
    assert diffs[0] / diffs[1] >= 3.0


def test_oracle_reports_origin_and_field(background, small_grid):
    data = vp1d.make_initial_data(background, small_grid, A_g=0.05, p=2.0)
    sol = splitting_solve(data, OracleConfig(grid=small_grid))
    assert sol.origin == "oracle"
    # stored field rows are consistent with the stored densities
    err = sol.field.compat_error(sol.rho)
    assert err <= 2.0 * small_grid.dx**2 * np.max(
        np.abs(np.diff(sol.rho, n=2, axis=1)) / small_grid.dx**2 + 1.0)
