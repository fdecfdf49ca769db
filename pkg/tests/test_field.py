import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from expgrowth.field import (
    Grid,
    SpectralField,
    analytic_norm,
    besov_norm,
    fsp_norm,
    laplacian,
    mean,
    norm_report,
    pad_spectrum,
    random_field,
    s_norm,
    transform_forward,
    transform_inverse,
    unpad_spectrum,
)


def dft_oracle(values, length=2 * math.pi):
    """Literal O(n^2) Fourier-series coefficients of 1D samples."""
    n = values.size
    x = length / n * np.arange(n)
    k = np.fft.fftfreq(n, d=1.0 / n) * 2 * math.pi / length
    return np.exp(-1j * np.outer(k, x)) @ values / n


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(3, 16)
    with pytest.raises(ValueError):
        Grid(1, 15)
    with pytest.raises(ValueError):
        Grid(1, 4)
    with pytest.raises(ValueError):
        Grid(1, 16, 0.0)
    g = Grid(2, 16, 4.0)
    assert g.shape == (16, 16)
    assert g.spacing == 0.25
    assert g.refined().n == 32


def test_sine_coefficients_and_norms():
    g = Grid(1, 32)
    A = 0.7
    f = SpectralField.from_function(g, lambda x: A * np.sin(x))
    c = f.spectral
    assert c[1] == pytest.approx(-0.5j * A, abs=1e-15)
    assert c[-1] == pytest.approx(0.5j * A, abs=1e-15)
    mask = np.ones(32, bool)
    mask[[1, -1]] = False
    assert np.max(np.abs(c[mask])) < 1e-15
    for s in (-1, 0, 2, 4, 6):
        # round-off in the zero modes is amplified by |k|^s
        assert s_norm(f, s) == pytest.approx(A, rel=1e-14 * 16.0 ** max(s, 0))
        assert besov_norm(f, s) == pytest.approx(A, rel=1e-14)
    assert fsp_norm(f, 0, 2) == pytest.approx(A / math.sqrt(2), rel=1e-14)
    assert analytic_norm(f, 0, 0.5) == pytest.approx(A * math.exp(0.5), rel=1e-14)


def test_transform_matches_literal_dft():
    rng = np.random.default_rng(1)
    g = Grid(1, 24, 3.0)
    v = rng.standard_normal(24)
    f = SpectralField.from_physical(g, v)
    assert np.allclose(f.spectral, dft_oracle(v, 3.0), atol=1e-14)


def test_round_trip_and_lazy_sync():
    rng = np.random.default_rng(2)
    g = Grid(2, 16)
    v = rng.standard_normal(g.shape)
    f = SpectralField.from_physical(g, v)
    assert not f.synced
    transform_forward(f)
    back = SpectralField.from_spectral(g, f.spectral)
    transform_inverse(back)
    assert np.allclose(back.physical, v, atol=1e-13)
    assert f.sync().synced


def test_field_validation():
    g = Grid(1, 16)
    with pytest.raises(ValueError):
        SpectralField(g)
    with pytest.raises(ValueError):
        SpectralField.from_physical(g, np.zeros(8))
    bad = np.zeros(16)
    bad[3] = np.nan
    with pytest.raises(ValueError):
        SpectralField.from_physical(g, bad)


def test_arithmetic_and_copy():
    g = Grid(1, 16)
    a = SpectralField.from_function(g, np.sin)
    b = SpectralField.from_function(g, np.cos)
    assert np.allclose((a + b).physical, np.sin(g.axis) + np.cos(g.axis))
    assert np.allclose((a - b).physical, np.sin(g.axis) - np.cos(g.axis))
    assert np.allclose((2 * a).physical, 2 * np.sin(g.axis))
    c = a.copy()
    assert c.physical is not a.physical


def test_laplacian_and_mean():
    g = Grid(2, 16)
    f = SpectralField.from_function(g, lambda x, y: 3.0 + np.sin(2 * x) * np.cos(y))
    assert mean(f) == pytest.approx(3.0, abs=1e-14)
    assert np.allclose(laplacian(f).physical, -5 * np.sin(2 * g.coords[0]) * np.cos(g.coords[1]), atol=1e-12)
    assert f.mean() == mean(f)


def test_norms_of_two_mode_field_by_hand():
    g = Grid(1, 64)
    # 0.2 cos(3x) + 0.05 sin(9x): |hhat| = 0.1 at |k|=3, 0.025 at |k|=9
    c = np.zeros(64, complex)
    c[[3, -3]] = 0.1
    c[9], c[-9] = -0.025j, 0.025j
    f = SpectralField.from_spectral(g, c)
    assert np.allclose(f.physical, 0.2 * np.cos(3 * g.axis) + 0.05 * np.sin(9 * g.axis), atol=1e-15)
    s = 2.0
    assert s_norm(f, s) == pytest.approx(2 * (9 * 0.1 + 81 * 0.025), rel=1e-13)
    # shells: 3 in [2, 4), 9 in [8, 16)
    assert besov_norm(f, s) == pytest.approx(2 * 81 * 0.025, rel=1e-13)
    p = 1.5
    ref = (2 * (3 ** (s * p) * 0.1**p + 9 ** (s * p) * 0.025**p)) ** (1 / p)
    assert fsp_norm(f, s, p) == pytest.approx(ref, rel=1e-13)
    nu = 0.3
    assert analytic_norm(f, s, nu) == pytest.approx(2 * (9 * 0.1 * math.exp(0.9) + 81 * 0.025 * math.exp(2.7)), rel=1e-13)


def test_besov_shells_at_powers_of_two():
    g = Grid(1, 64)
    # |k| = 4 and 7 share the shell [4, 8); |k| = 8 starts the next one
    f = SpectralField.from_function(g, lambda x: np.cos(4 * x) + np.cos(7 * x) + 0.1 * np.cos(8 * x))
    assert besov_norm(f, 0) == pytest.approx(2.0, rel=1e-13)


def test_norm_argument_errors():
    f = SpectralField.from_function(Grid(1, 16), np.sin)
    with pytest.raises(ValueError):
        fsp_norm(f, 0, 3)
    with pytest.raises(ValueError):
        analytic_norm(f, 0, -1)
    with pytest.raises(OverflowError):
        analytic_norm(f, 0, 200.0)


def test_zero_field_norms():
    f = SpectralField.zeros(Grid(1, 16))
    assert s_norm(f, 2) == 0.0
    assert besov_norm(f, 2) == 0.0
    assert fsp_norm(f, 2, 1.5) == 0.0


@given(st.integers(0, 10_000), st.sampled_from([-1.0, 0.0, 2.0, 4.0, 6.0]), st.sampled_from([1, 2]))
@settings(max_examples=40, deadline=None)
def test_besov_below_s_norm(seed, s, dim):
    g = Grid(dim, 16)
    f = random_field(g, np.random.default_rng(seed), band=7)
    assert besov_norm(f, s) <= s_norm(f, s) * (1 + 1e-14)


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_parseval(seed):
    g = Grid(1, 32)
    f = random_field(g, np.random.default_rng(seed), band=12)
    l2 = math.sqrt(np.mean(f.physical**2))  # = (sum |hhat|^2)^(1/2)
    assert fsp_norm(f, 0, 2) == pytest.approx(l2, rel=1e-12)


def test_random_field():
    g = Grid(2, 16)
    f = random_field(g, np.random.default_rng(0), band=5, norm2=0.1)
    assert s_norm(f, 2) == pytest.approx(0.1, rel=1e-13)
    assert abs(mean(f)) == 0.0
    kint = np.sqrt(g.integer_wavenumbers[0] ** 2 + g.integer_wavenumbers[1] ** 2)
    assert np.all(f.spectral[kint > 5] == 0)
    # real field: imaginary part of the inverse transform vanishes
    assert np.max(np.abs(np.fft.ifftn(f.spectral).imag)) < 1e-16
    g2 = random_field(g, np.random.default_rng(0), band=5, norm2=0.1)
    assert np.array_equal(f.spectral, g2.spectral)


def test_pad_unpad_inverse():
    g = Grid(2, 8)
    f = random_field(g, np.random.default_rng(3), band=3)
    big = pad_spectrum(f.spectral, g, 12)
    assert big.shape == (12, 12)
    assert np.array_equal(unpad_spectrum(big, g), f.spectral)
    # trigonometric interpolation: x = 2 pi i / 8 with i even coincides with 2 pi j / 12, j = 3 i / 2
    fine = np.fft.ifftn(big).real * 144
    assert np.allclose(fine[::3, ::3], f.physical[::2, ::2], atol=1e-14)


def test_norm_report_flat_names():
    f = SpectralField.from_function(Grid(1, 16), np.sin)
    rep = norm_report(f, (2.0, 6.0), (2.0,), ((0.0, 2.0), (2.0, 1.5)), ((2.0, 0.5),)).flat()
    for key in ("s_norm[2]", "s_norm[6]", "besov[2]", "fsp[0,2]", "fsp[2,1.5]", "analytic[2,0.5]", "sup_h", "sup_lap"):
        assert key in rep
    assert rep["sup_h"] == pytest.approx(1.0, abs=1e-2)
