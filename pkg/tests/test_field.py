import numpy as np
import pytest
from scipy.integrate import quad

import vp1d
from vp1d import FieldHistory, InvalidProfile, OutOfRange, charge_density
from vp1d.field import field_from_density, tail_integral, weight_integral
from vp1d.norms import weight


@pytest.fixture
def fgrid():
    return vp1d.PhaseGrid(L=20.0, Nx=401, Vmax=4.0, Nv=129, T_end=0.5, Nt=6)


def test_charge_density_neutral_background(background, fgrid):
    f = np.tile(background(fgrid.v), (fgrid.Nx, 1))
    snap = charge_density(f, background, fgrid, p=2.0)
    assert np.all(snap.values == 0.0)
    assert snap.norm_p == 0.0


def test_charge_density_builtin_matches_quadrature(background, fgrid):
    # rho(x) = A_g R^{-p}(x) * int phi dv, the integral from adaptive
    # quadrature rather than the grid's own Simpson rule
    a_g = 0.05
    data = vp1d.make_initial_data(background, fgrid, A_g=a_g, p=2.0)
    f0 = data.f0(fgrid.x[:, None], fgrid.v[None, :])
    snap = charge_density(f0, background, fgrid, p=2.0)
    phi_int, _ = quad(lambda v: (1.0 - v * v) ** 4, -1.0, 1.0)
    assert phi_int == pytest.approx(256.0 / 315.0, rel=1e-12)
    expected = a_g * weight(fgrid.x) ** -2.0 * phi_int
    # tolerance covers the grid Simpson rule's own truncation error
    assert np.max(np.abs(snap.values - expected)) < 1e-6 * a_g
    assert snap.norm_p == pytest.approx(a_g * phi_int, rel=1e-5)


def test_charge_density_ignores_odd_part(background, fgrid):
    data = vp1d.make_initial_data(background, fgrid, A_g=0.05, p=2.0)
    f0 = data.f0(fgrid.x[:, None], fgrid.v[None, :])
    odd = 0.3 * fgrid.v * np.exp(-fgrid.v**2)
    snap_even = charge_density(f0, background, fgrid, p=2.0)
    snap_mixed = charge_density(f0 + odd[None, :], background, fgrid, p=2.0)
    assert np.max(np.abs(snap_mixed.values - snap_even.values)) < 1e-14


def test_charge_density_rejects_non_finite(background, fgrid):
    f = np.zeros((fgrid.Nx, fgrid.Nv))
    f[5, 5] = np.nan
    with pytest.raises(InvalidProfile):
        charge_density(f, background, fgrid, p=2.0)


def test_field_zero_density(fgrid):
    e = field_from_density(np.zeros(fgrid.Nx), fgrid.x, p=2.0)
    assert np.all(e == 0.0)


def test_field_even_density_gives_odd_field(fgrid):
    rho = np.exp(-fgrid.x**2) + 0.1 * weight(fgrid.x) ** -2.0
    e = field_from_density(rho, fgrid.x, p=2.0)
    asym = np.max(np.abs(e + e[::-1]))
    assert asym <= 1e-12 * np.max(np.abs(e))


def test_field_indicator_prefix_oracle(fgrid):
    # rho = indicator of [-1, 1]: exactly E(x) = clamp(x, -1, 1) up to
    # trapezoid smearing of O(dx) at the jumps
    rho = (np.abs(fgrid.x) <= 1.0).astype(float)
    e = field_from_density(rho, fgrid.x, p=2.0, tail_mode="zero")
    exact = np.clip(fgrid.x, -1.0, 1.0)
    assert np.max(np.abs(e - exact)) <= 0.6 * fgrid.dx
    interior = np.abs(fgrid.x) <= 0.9
    assert np.max(np.abs((e - exact)[interior])) <= 1e-12


def test_field_jump_identity(background, fgrid):
    # E(L) - E(-L) equals the trapezoid integral of rho over the box
    data = vp1d.make_initial_data(background, fgrid, A_g=0.05, p=2.0)
    f0 = data.f0(fgrid.x[:, None], fgrid.v[None, :])
    snap = charge_density(f0, background, fgrid, p=2.0)
    for mode in ("powerlaw", "zero"):
        e = field_from_density(snap.values, fgrid.x, 2.0, mode)
        trap = np.sum(0.5 * fgrid.dx * (snap.values[1:] + snap.values[:-1]))
        assert e[-1] - e[0] == pytest.approx(trap, abs=1e-10 * snap.norm_p)


def test_field_compat_refinement(background):
    # centered d_x E recovers rho at 2nd order: error drops >= 3.5x per halving
    errs = []
    for nx in (201, 401, 801):
        g = vp1d.PhaseGrid(L=20.0, Nx=nx, Vmax=4.0, Nv=17, T_end=0.5, Nt=2)
        rho = 0.04 * weight(g.x) ** -2.0 * (1.0 + 0.5 * np.sin(g.x))
        hist = FieldHistory.from_densities(g, np.tile(rho, (2, 1)), p=2.0)
        errs.append(hist.compat_error(np.tile(rho, (2, 1))))
    assert errs[0] / errs[1] >= 3.5
    assert errs[1] / errs[2] >= 3.5


def test_field_bound_from_decay_norm(fgrid):
    # |E| <= ||rho||_p * int R^{-p} with 5% slack, for several profiles
    assert weight_integral(2.0) == pytest.approx(np.pi, rel=1e-9)
    rng = np.random.default_rng(4)
    for _ in range(5):
        c = rng.uniform(0.01, 1.0)
        rho = c * weight(fgrid.x) ** -2.0 * rng.uniform(-1, 1, fgrid.Nx)
        e = field_from_density(rho, fgrid.x, 2.0)
        norm = vp1d.weighted_sup(rho, fgrid.x, 2.0)
        assert np.max(np.abs(e)) <= 1.05 * norm * np.pi


def test_interp_reproduces_nodes(fgrid):
    rng = np.random.default_rng(5)
    E = rng.normal(size=(fgrid.Nt, fgrid.Nx))
    hist = FieldHistory.from_values(fgrid, E)
    for m, j in [(0, 0), (2, 17), (5, 400), (3, 200)]:
        assert hist.eval(fgrid.t[m], fgrid.x[j]) == E[m, j]


def test_interp_linear_field_midpoint(fgrid):
    # linear-in-x rows at two snapshots, query at the temporal midpoint:
    # cubic reproduces linears exactly and time blending is exact
    E = np.zeros((fgrid.Nt, fgrid.Nx))
    E[0] = 2.0 * fgrid.x + 1.0
    E[1] = -1.0 * fgrid.x + 3.0
    hist = FieldHistory.from_values(fgrid, E)
    t_mid = 0.5 * fgrid.t[1]
    for xq in (-13.37, 0.421, 7.77):
        expected = 0.5 * (2.0 * xq + 1.0) + 0.5 * (-xq + 3.0)
        assert hist.eval(t_mid, xq) == pytest.approx(expected, rel=1e-14)


def test_interp_richardson_refinement():
    # smooth test field sin(x) e^{-t}: error behaves like C (dx^4 + dt^2),
    # so simultaneous halving shrinks it by >= ~4x (dt^2 dominates)
    def interp_err(nx, nt):
        g = vp1d.PhaseGrid(L=4.0, Nx=nx, Vmax=1.0, Nv=3, T_end=1.0, Nt=nt)
        E = np.sin(g.x)[None, :] * np.exp(-g.t)[:, None]
        hist = FieldHistory.from_values(g, E)
        rng = np.random.default_rng(3)
        ts = rng.uniform(0, 1.0, 400)
        xs = rng.uniform(-3.9, 3.9, 400)
        return np.max(np.abs(hist.eval_many(ts, xs) - np.sin(xs) * np.exp(-ts)))

    e1, e2, e3 = interp_err(41, 11), interp_err(81, 21), interp_err(161, 41)
    assert e1 / e2 >= 3.5
    assert e2 / e3 >= 3.5


def test_interp_out_of_range(fgrid):
    hist = FieldHistory.from_values(fgrid, np.zeros((fgrid.Nt, fgrid.Nx)))
    with pytest.raises(OutOfRange):
        hist.eval(fgrid.T_end + 0.1, 0.0)
    with pytest.raises(OutOfRange):
        hist.eval_many(np.array([-0.2]), np.array([0.0]))


def test_tail_mode_sensitivity(background, fgrid):
    # inside the box the two closures differ by (T_neg - T_pos)/2: equal
    # tail masses shift the prefix and the half-total identically, so a
    # symmetric density feels nothing and an asymmetric one feels
    # exactly half the tail-mass imbalance
    data = vp1d.make_initial_data(background, fgrid, A_g=0.05, p=2.0)
    f0 = data.f0(fgrid.x[:, None], fgrid.v[None, :])
    snap = charge_density(f0, background, fgrid, p=2.0)
    e_pow = field_from_density(snap.values, fgrid.x, 2.0, "powerlaw")
    e_zero = field_from_density(snap.values, fgrid.x, 2.0, "zero")
    assert np.max(np.abs(e_pow - e_zero)) < 1e-16

    shifted = 0.04 * weight(fgrid.x - 5.0) ** -2.0
    e_pow = field_from_density(shifted, fgrid.x, 2.0, "powerlaw")
    e_zero = field_from_density(shifted, fgrid.x, 2.0, "zero")
    diff = np.max(np.abs(e_pow - e_zero))
    rl_p = (1 + fgrid.L**2)
    imbalance = 0.5 * abs(shifted[0] - shifted[-1]) * rl_p * tail_integral(
        fgrid.L, 2.0)
    assert diff > 0
    assert diff == pytest.approx(imbalance, rel=1e-12)


def test_field_beyond_box_follows_tail_model(fgrid):
    rho = 0.04 * weight(fgrid.x) ** -2.0
    hist = FieldHistory.from_densities(fgrid, np.tile(rho, (fgrid.Nt, 1)), p=2.0)
    e_edge = hist.eval(0.0, fgrid.L)
    e_out = hist.eval(0.0, fgrid.L + 3.0)
    expected = e_edge + rho[-1] * (1 + fgrid.L**2) * (
        tail_integral(fgrid.L, 2.0) - tail_integral(fgrid.L + 3.0, 2.0))
    assert e_out == pytest.approx(expected, rel=1e-9)
    # zero-tail mode clamps instead
    hist0 = FieldHistory.from_densities(fgrid, np.tile(rho, (fgrid.Nt, 1)),
                                        p=2.0, tail_mode="zero")
    assert hist0.eval(0.0, fgrid.L + 3.0) == hist0.eval(0.0, fgrid.L)


def test_impulse_bound_constant_field():
    g = vp1d.PhaseGrid(L=5.0, Nx=11, Vmax=1.0, Nv=3, T_end=2.0, Nt=21)
    hist = FieldHistory.from_values(g, np.ones((g.Nt, g.Nx)))
    assert hist.impulse_bound() == pytest.approx(2.0, rel=1e-14)
    zero = FieldHistory.from_values(g, np.zeros((g.Nt, g.Nx)))
    assert zero.impulse_bound() == 0.0
