import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbtorus.spectral import (ConfigurationError, GridSpec, SpectralField, StructuralError,
                              bracket, dealias_product, derivative, embedding_constant,
                              random_field, sobolev_norm, to_physical, to_spectral)


def direct_synthesis(f: SpectralField) -> np.ndarray:
    x = f.grid.x
    k = f.grid.wavenumbers
    return (f.coeffs[None, :] * np.exp(1j * np.outer(x, k))).sum(axis=1)


def direct_analysis(samples, grid: GridSpec) -> np.ndarray:
    x = grid.x
    k = grid.wavenumbers
    return (samples[:, None] * np.exp(-1j * np.outer(x, k))).mean(axis=0)


def brute_convolution(a, b, N):
    out = np.zeros(2 * N + 1, dtype=complex)
    for k in range(-N, N + 1):
        for k1 in range(-N, N + 1):
            k2 = k - k1
            if abs(k2) <= N:
                out[k + N] += a[k1 + N] * b[k2 + N]
    return out


def test_grid_defaults_and_rejections():
    g = GridSpec(64)
    assert g.M >= 3 * 64 + 1 and g.dealiased
    with pytest.raises(ConfigurationError):
        GridSpec(0)
    with pytest.raises(ConfigurationError):
        GridSpec(8, phys_points=16)
    with pytest.raises(ConfigurationError):
        GridSpec(64, phys_points=128)          # cannot even resolve 129 modes
    small = GridSpec(64, phys_points=160)      # resolves the modes but aliases products
    assert not small.dealiased
    f = random_field(small, 1.0, 0)
    with pytest.raises(ConfigurationError):
        dealias_product(f, f)


def test_two_mode_synthesis():
    g = GridSpec(4)
    f = SpectralField.from_modes(g, {1: 1.0})
    np.testing.assert_allclose(to_physical(f), 2 * np.cos(g.x), atol=1e-14)
    np.testing.assert_array_equal(to_physical(SpectralField.zeros(g)), np.zeros(g.M))


def test_hermitian_violation_is_structural_error():
    g = GridSpec(4)
    f = SpectralField.from_modes(g, {1: 1.0}, hermitian=False)
    with pytest.raises(StructuralError):
        to_physical(f)


@pytest.mark.parametrize("seed", range(5))
def test_round_trip_against_direct_dft(seed):
    g = GridSpec(12)
    f = random_field(g, 0.0, seed, mean_zero=False)
    samples = to_physical(f)
    np.testing.assert_allclose(samples, direct_synthesis(f).real, atol=1e-12)
    back = to_spectral(samples, g)
    np.testing.assert_allclose(back.coeffs, f.coeffs, atol=1e-12)
    np.testing.assert_allclose(direct_analysis(samples, g), f.coeffs, atol=1e-12)


def test_to_spectral_hand_values():
    g = GridSpec(4)
    c = to_spectral(np.cos(2 * g.x), g)
    assert c.mode(2) == pytest.approx(0.5) and c.mode(-2) == pytest.approx(0.5)
    assert to_spectral(np.ones(g.M), g).mode(0) == pytest.approx(1.0)
    sq = to_spectral(4 * np.cos(g.x) ** 2, g)
    assert sq.mode(0) == pytest.approx(2.0)
    assert sq.mode(2) == pytest.approx(1.0) and sq.mode(-2) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        to_spectral(np.ones(g.M + 1), g)


def test_sobolev_norm_values():
    g = GridSpec(4)
    assert sobolev_norm(SpectralField.from_modes(g, {1: 1.0}), 1.0) == pytest.approx(2.0)
    assert sobolev_norm(SpectralField.zeros(g), 3.0) == 0.0
    N = 20
    g = GridSpec(N)
    f = SpectralField(g, bracket(g.wavenumbers) ** -2.0)
    expected = np.sqrt(sum((1.0 + k * k) ** 2 * (1.0 + k * k) ** -2 for k in range(-N, N + 1)))
    assert sobolev_norm(f, 2.0) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(np.sqrt(2 * N + 1))
    r = random_field(g, 1.0, 3)
    assert sobolev_norm(r, 0.0) == r.l2()


def test_derivative_conventions():
    g = GridSpec(4)
    f = SpectralField.from_modes(g, {1: 1.0})
    np.testing.assert_allclose(to_physical(derivative(f, 1)), -2 * np.sin(g.x), atol=1e-14)
    r = random_field(g, 0.0, 1)
    d3 = derivative(r, 3)
    for k in range(-4, 5):
        assert d3.mode(k) == pytest.approx(-1j * k ** 3 * r.mode(k))
    const = SpectralField.from_modes(g, {0: 2.5})
    assert derivative(const, 2).l2() == 0.0
    assert derivative(r, 5).is_hermitian()


def test_dealias_product_hand_and_zero():
    g = GridSpec(4)
    f = SpectralField.from_modes(g, {1: 1.0})
    p = dealias_product(f, f)
    assert p.mode(0) == pytest.approx(2.0)
    assert p.mode(2) == pytest.approx(1.0) and p.mode(-2) == pytest.approx(1.0)
    assert dealias_product(random_field(g, 0, 1), SpectralField.zeros(g)).l2() == 0.0


@pytest.mark.parametrize("seed", range(100))
def test_dealias_product_brute_force(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(8, 17))
    g = GridSpec(N)
    f = random_field(g, 0.0, 2 * seed, mean_zero=False)
    h = random_field(g, 0.0, 2 * seed + 1, mean_zero=False)
    np.testing.assert_allclose(dealias_product(f, h).coeffs, brute_convolution(f.coeffs, h.coeffs, N),
                               atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 16), st.integers(0, 2**32 - 1), st.floats(-1.0, 3.0))
def test_random_field_properties(N, seed, s):
    g = GridSpec(N)
    f = random_field(g, s, seed)
    assert f.mean == 0
    assert f.is_hermitian(0.0)
    np.testing.assert_array_equal(f.coeffs, random_field(g, s, seed).coeffs)
    k = np.arange(1, N + 1)
    np.testing.assert_allclose(np.abs(f.half[1:]), bracket(k) ** (-s - 0.51), rtol=1e-12)
    samples = to_physical(f)
    np.testing.assert_allclose(to_spectral(samples, g).coeffs, f.coeffs, atol=1e-12)


def test_random_field_tail_growth():
    s = 1.0
    norms_1, norms_16 = [], []
    for N in (32, 64, 128, 256):
        f = random_field(GridSpec(N), s, 7)
        norms_1.append(sobolev_norm(f, 1.0))
        norms_16.append(sobolev_norm(f, 1.6))
        # tail-sum oracle: sum_k <k>^{2 s1} <k>^{-2 s - 1.02} over 1 <= |k| <= N
        k = np.arange(1, N + 1)
        oracle = np.sqrt(2 * np.sum((1.0 + k * k) ** (1.6 - s - 0.51)))
        assert norms_16[-1] == pytest.approx(oracle, rel=1e-12)
    assert max(norms_1) < 1.6 * min(norms_1)
    assert all(b > 1.5 * a for a, b in zip(norms_16, norms_16[1:]))
    nz = random_field(GridSpec(8), 1.0, 2, mean_zero=False)
    assert abs(nz.mean) == 1.0


def test_embedding_constant_is_attained():
    g = GridSpec(64)
    C = embedding_constant(g)
    # Cauchy-Schwarz bound sqrt(sum <k>^-2) is attained by w_k = <k>^-2
    bound = np.sqrt(np.sum(bracket(g.wavenumbers) ** -2.0))
    assert C == pytest.approx(bound, rel=1e-12)
    for seed in range(20):
        w = random_field(g, 0.5, seed, mean_zero=False)
        assert np.max(np.abs(to_physical(w))) <= C * sobolev_norm(w, 1.0) * (1 + 1e-12)
