"""Shared fixtures.

The default benchmark (W=1, A_F=1, A_g=0.05, p=2, L=20, Nx=401, Vmax=4,
Nv=129, T_end=0.5, Nt=51, tol=1e-10) is expensive, so everything derived
from it is session-scoped and computed once.  Unit tests use the small
grids below instead.
"""
import numpy as np
import pytest

import vp1d
from vp1d.oracle import OracleConfig, splitting_solve

BENCH = dict(L=20.0, Nx=401, Vmax=4.0, Nv=129, T_end=0.5, Nt=51)
TOL = 1e-10


@pytest.fixture(scope="session")
def background():
    return vp1d.make_background(W=1.0, A_F=1.0)


@pytest.fixture(scope="session")
def bench_grid():
    return vp1d.PhaseGrid(**BENCH)


@pytest.fixture(scope="session")
def bench_data(background, bench_grid):
    return vp1d.make_initial_data(background, bench_grid, A_g=0.05, p=2.0)


@pytest.fixture(scope="session")
def bench_run(bench_data, bench_grid):
    """Converged benchmark solution and its trace."""
    return vp1d.solve(bench_data, bench_grid, tol=TOL)


@pytest.fixture(scope="session")
def bench_solution(bench_run):
    return bench_run[0]


@pytest.fixture(scope="session")
def bench_trace(bench_run):
    return bench_run[1]


@pytest.fixture(scope="session")
def bench_oracle(bench_data, bench_grid):
    return splitting_solve(bench_data, OracleConfig(grid=bench_grid))


@pytest.fixture(scope="session")
def half_horizon_run(bench_data, bench_grid):
    """Same spatial grid, horizon 0.25 (used by contraction and extension)."""
    grid = bench_grid.with_horizon(0.25, 26)
    return vp1d.solve(bench_data, grid, tol=TOL)


@pytest.fixture(scope="session")
def small_grid():
    return vp1d.PhaseGrid(L=20.0, Nx=101, Vmax=4.0, Nv=33, T_end=0.4, Nt=11)


@pytest.fixture(scope="session")
def small_data(background, small_grid):
    return vp1d.make_initial_data(background, small_grid, A_g=0.05, p=2.0)


@pytest.fixture(scope="session")
def small_run(small_data, small_grid):
    return vp1d.solve(small_data, small_grid, tol=TOL)


def pytest_addoption(parser):
    parser.addoption("--skip-heavy", action="store_true", default=False,
                     help="skip the multi-minute refinement studies")


@pytest.fixture(scope="session")
def heavy_enabled(request):
    return not request.config.getoption("--skip-heavy")


def require_heavy(heavy_enabled):
    if not heavy_enabled:
        pytest.skip("heavy refinement study skipped (--skip-heavy)")
