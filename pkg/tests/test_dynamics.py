import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from mbtorus.dynamics import (ETDRK4, IFRK4, BlowUpError, MBState, SimParams, conserved_quantities,
                              damped_energy_residual, evolve, integrate, linear_flow, step_ifrk4)
from mbtorus.experiments import stationary_solve
from mbtorus.spectral import ConfigurationError, GridSpec, SpectralField, random_field


def brute_conv(a, b, N):
    # full linear convolution of the (2N+1)-vectors, truncated to |k| <= N
    return np.convolve(a, b)[N:3 * N + 1]


def oracle_rhs(alpha, N, gamma=0.0, delta=0.0, f=None, g=None):
    """Full-spectrum right-hand side written independently of the package kernels."""
    k = np.arange(-N, N + 1)
    f = np.zeros(2 * N + 1) if f is None else f
    g = np.zeros(2 * N + 1) if g is None else g

    def rhs(_, y):
        u, v = y[:2 * N + 1], y[2 * N + 1:]
        du = (1j * k ** 3 - gamma) * u - 0.5j * k * brute_conv(v, v, N) + f
        dv = (1j * alpha * k ** 3 - delta) * v - 1j * k * brute_conv(u, v, N) + g
        return np.concatenate([du, dv])
    return rhs


def reference(alpha, u0, v0, t, **kw):
    N = u0.grid.N
    y0 = np.concatenate([u0.coeffs, v0.coeffs])
    sol = solve_ivp(oracle_rhs(alpha, N, **kw), (0, t), y0, method="DOP853", rtol=1e-12, atol=1e-13)
    y = sol.y[:, -1]
    return y[:2 * N + 1], y[2 * N + 1:]


def test_params_validation():
    g = GridSpec(8)
    with pytest.raises(ConfigurationError):
        SimParams("1/2", GridSpec(8, phys_points=20))
    SimParams("1/2", GridSpec(8, phys_points=20), nonlinear=False)
    with pytest.raises(ValueError):
        SimParams("1/2", g, f=SpectralField.from_modes(g, {0: 1.0}))
    with pytest.raises(ValueError):
        SimParams("1/2", g, f=SpectralField.from_modes(GridSpec(9), {1: 1.0}))
    with pytest.raises(ValueError):
        SimParams("1/2", g, dt=-1)
    with pytest.raises(ValueError):
        SimParams("1/2", g, scheme="euler")
    assert SimParams("1/2", GridSpec(64)).dt == pytest.approx(1e-3)
    assert SimParams("1/2", GridSpec(4096)).dt == pytest.approx(0.5 / 4096)


@pytest.mark.parametrize("alpha", ["1/2", "1/7"])
@pytest.mark.parametrize("damping", [(0.0, 0.0), (0.7, 0.3)])
def test_linear_exactness(alpha, damping):
    g = GridSpec(64)
    u0, v0 = random_field(g, 1.0, 1), random_field(g, 1.0, 2)
    gamma, delta = damping
    p = SimParams(alpha, g, t_end=1.0, nonlinear=False, gamma=gamma, delta=delta)
    fin = evolve(p, u0, v0).final
    a = p.alpha_value
    k = g.wavenumbers
    # closed form written out here rather than via linear_flow
    u_exact = np.exp((1j * k ** 3 - gamma) * 1.0) * u0.coeffs
    v_exact = np.exp((1j * a * k ** 3 - delta) * 1.0) * v0.coeffs
    assert np.max(np.abs(fin.u.coeffs - u_exact)) <= 1e-10
    assert np.max(np.abs(fin.v.coeffs - v_exact)) <= 1e-10
    np.testing.assert_allclose(linear_flow(v0, a, delta, 1.0).coeffs, v_exact, atol=1e-14)


def test_step_matches_dop853_and_is_fourth_order():
    g = GridSpec(12)
    u0, v0 = random_field(g, 2.0, 3), random_field(g, 2.0, 4)
    ru, rv = reference(0.5, u0, v0, 0.5)
    errs = []
    for dt in (2.5e-3, 1.25e-3, 6.25e-4):
        fin = evolve(SimParams("1/2", g, t_end=0.5, dt=dt), u0, v0).final
        errs.append(max(np.max(np.abs(fin.u.coeffs - ru)), np.max(np.abs(fin.v.coeffs - rv))))
    assert errs[-1] < 1e-7
    assert errs[0] / errs[1] > 12 and errs[1] / errs[2] > 12


def test_single_step_matches_integrate():
    g = GridSpec(8)
    s0 = MBState(random_field(g, 1, 0), random_field(g, 1, 1), 0.0)
    p = SimParams("1/3", g, dt=1e-3)
    s1 = step_ifrk4(s0, p)
    u, v = integrate(p, s0.u.half, s0.v.half, 1)
    np.testing.assert_array_equal(s1.u.half, u)
    assert s1.t == pytest.approx(1e-3)
    assert s1.u.is_hermitian(0.0)


def test_damped_forced_against_oracle_both_schemes():
    g = GridSpec(10)
    u0, v0 = random_field(g, 2.0, 5), random_field(g, 2.0, 6)
    f = SpectralField.from_modes(g, {1: 0.2, 3: 0.05j})
    h = SpectralField.from_modes(g, {2: -0.1})
    ru, rv = reference(1 / 3, u0, v0, 0.5, gamma=0.8, delta=0.4, f=f.coeffs, g=h.coeffs)
    for scheme in ("ifrk4", "etdrk4"):
        p = SimParams("1/3", g, t_end=0.5, dt=1e-3, gamma=0.8, delta=0.4, f=f, g=h, scheme=scheme)
        fin = evolve(p, u0, v0).final
        assert np.max(np.abs(fin.u.coeffs - ru)) < 1e-7, scheme
        assert np.max(np.abs(fin.v.coeffs - rv)) < 1e-7, scheme


def test_conserved_quantities_hand_values():
    g = GridSpec(8)
    u = SpectralField.from_modes(g, {2: 1.0})   # 2 cos 2x
    v = SpectralField.from_modes(g, {1: 1.0})   # 2 cos x
    alpha = 0.5
    E1, E2, E3, E4 = conserved_quantities(MBState(u, v), alpha)
    assert (E1, E2) == (0.0, 0.0)
    assert E3 == pytest.approx(8 * math.pi)
    # int u_x^2 = 16 pi, alpha int v_x^2 = 4 pi alpha, int u v^2 = 4 pi
    assert E4 == pytest.approx(16 * math.pi + 4 * math.pi * alpha - 4 * math.pi, rel=1e-13)
    c = SpectralField.from_modes(g, {0: 0.5})
    E1, E2, *_ = conserved_quantities(MBState(c, c * 2), alpha)
    assert (E1, E2) == pytest.approx((math.pi, 2 * math.pi))


def test_conservation_small_grid():
    g = GridSpec(16)
    u0 = random_field(g, 3.0, 1, mean_zero=False)
    v0 = random_field(g, 3.0, 2, mean_zero=False)
    drifts = []
    for dt in (4e-3, 2e-3):
        rec = evolve(SimParams("1/2", g, t_end=2.0, dt=dt), u0, v0, sample_every=50)
        s = rec.series
        assert np.ptp(s["E1"]) < 1e-13 and np.ptp(s["E2"]) < 1e-13
        drifts.append(abs(s["E3"][-1] - s["E3"][0]) / s["E3"][0])
    assert drifts[1] < 1e-8
    assert drifts[0] / drifts[1] > 10


def test_pure_damping_energy_decay():
    g = GridSpec(32)
    u0, v0 = random_field(g, 2.0, 7), random_field(g, 2.0, 8)
    gamma = 0.6
    p = SimParams("1/2", g, t_end=1.0, gamma=gamma, delta=gamma)
    rec = evolve(p, u0, v0, sample_every=100)
    E3 = rec.series["E3"]
    np.testing.assert_allclose(E3, E3[0] * np.exp(-2 * gamma * rec.times), rtol=1e-6)


def test_damped_residual_is_second_order_in_stride():
    g = GridSpec(16)
    u0, v0 = random_field(g, 2.0, 9), random_field(g, 2.0, 10)
    f = SpectralField.from_modes(g, {1: 0.3})
    p = SimParams("1/2", g, t_end=1.0, dt=1e-3, gamma=0.5, delta=0.2, f=f, g=f)
    worst = []
    for stride in (40, 20, 10):
        t, r = damped_energy_residual(evolve(p, u0, v0, sample_every=stride))
        worst.append(np.max(np.abs(r)))
    assert worst[0] / worst[1] > 3.5 and worst[1] / worst[2] > 3.5


def test_coarse_stride_is_annotated():
    g = GridSpec(8)
    p = SimParams("1/2", g, t_end=1.0, dt=1e-2, gamma=5.0, delta=5.0)
    rec = evolve(p, random_field(g, 1, 0), random_field(g, 1, 1), sample_every=10)
    with pytest.warns(UserWarning):
        damped_energy_residual(rec)
    assert rec.annotations


def test_blowup_detected():
    g = GridSpec(16)
    u0, v0 = random_field(g, 0.0, 0) * 1e5, random_field(g, 0.0, 1) * 1e5
    with pytest.raises(BlowUpError) as info:
        evolve(SimParams("1/2", g, t_end=1.0, dt=0.05), u0, v0)
    t, u, v = info.value.state
    assert np.all(np.isfinite(u))


def test_zero_data_stays_zero_and_time_hits_t_end():
    g = GridSpec(8)
    z = SpectralField.zeros(g)
    rec = evolve(SimParams("1/2", g, t_end=0.3, dt=0.07), z, z)
    assert rec.times[-1] == pytest.approx(0.3, abs=1e-15)
    for key, val in rec.series.items():
        assert np.all(val == 0), key


def test_etdrk4_keeps_stationary_pair_fixed():
    g = GridSpec(32)
    f = SpectralField.from_modes(g, {1: 0.2, 2: 0.1j})
    pair = stationary_solve(f, f, 5.0, 5.0, "1/2")
    p = SimParams("1/2", g, t_end=1.0, gamma=5.0, delta=5.0, f=f, g=f, scheme="etdrk4")
    fin = evolve(p, pair.p, pair.q).final
    assert (fin.u - pair.p).l2() + (fin.v - pair.q).l2() < 1e-12


def test_batched_integration_equals_separate_runs():
    g = GridSpec(8)
    p = SimParams("1/2", g, dt=1e-3)
    us = [random_field(g, 1, i).half for i in range(3)]
    vs = [random_field(g, 1, 10 + i).half for i in range(3)]
    U, V = integrate(p, np.stack(us), np.stack(vs), 50)
    for i in range(3):
        u, v = integrate(p, us[i], vs[i], 50)
        np.testing.assert_allclose(U[i], u, atol=1e-15)
    for cls in (IFRK4, ETDRK4):
        assert cls(p).dt == 1e-3


def test_runs_are_deterministic():
    g = GridSpec(16)
    p = SimParams("1/2", g, t_end=0.2)
    a = evolve(p, random_field(g, 1, 0), random_field(g, 1, 1))
    b = evolve(p, random_field(g, 1, 0), random_field(g, 1, 1))
    for key in a.series:
        np.testing.assert_array_equal(a.series[key], b.series[key])
