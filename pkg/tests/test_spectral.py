import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from capsule_bim import spectral as sp
from conftest import random_band_limited

SIZES = (16, 64, 256)


@pytest.mark.parametrize("n", SIZES)
def test_hilbert_symbol(n):
    grid = sp.get_grid(n)
    k = grid.band
    for kk in (1, 3, -2, n // 2 - 1, -(n // 2) + 1):
        f = np.exp(1j * kk * grid.nodes)
        expected = -1j * np.sign(kk) * f
        assert np.max(np.abs(sp.hilbert_transform(f) - expected)) < 1e-12
    # zero mode and Nyquist mode are annihilated
    assert np.max(np.abs(sp.hilbert_transform(np.ones(n)))) < 1e-14
    assert np.max(np.abs(sp.hilbert_transform(np.cos(n // 2 * grid.nodes)))) < 1e-13
    assert k[-1] == n // 2


@pytest.mark.parametrize("n", SIZES)
def test_hilbert_sum_matches_fft(n, rng):
    f = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    a = sp.hilbert_transform(f, method="sum")
    b = sp.hilbert_transform(f, method="fft")
    assert np.max(np.abs(a - b)) < 1e-12 * max(1.0, np.log(n))


@pytest.mark.parametrize("n", SIZES)
def test_operator_identities(n, rng):
    f = random_band_limited(n, rng)
    hf = sp.hilbert_transform(f)
    assert np.max(np.abs(sp.hilbert_transform(hf) + f)) < 1e-12
    comm = sp.hilbert_transform(sp.spectral_derivative(f)) - sp.spectral_derivative(hf)
    assert np.max(np.abs(comm)) < 1e-12 * n
    # Parseval: h sum |f|^2 = 2 pi sum |f_k|^2
    h = 2 * np.pi / n
    lhs = h * np.sum(np.abs(f) ** 2)
    rhs = 2 * np.pi * np.sum(np.abs(sp.dft(f)) ** 2)
    assert abs(lhs - rhs) < 1e-12 * max(1.0, lhs)


def test_dft_round_trip_and_node_phase(rng):
    n = 32
    f = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    assert np.max(np.abs(sp.idft(sp.dft(f)) - f)) < 1e-14
    g = sp.get_grid(n)
    c = sp.dft(np.exp(3j * g.nodes))
    assert abs(c[g.band == 3][0] - 1.0) < 1e-14


@pytest.mark.parametrize("n", (32, 64))
def test_spectral_derivative_accuracy(n):
    x = sp.get_grid(n).nodes
    f = np.exp(np.sin(x))
    df = np.cos(x) * f
    assert np.max(np.abs(sp.spectral_derivative(f) - df)) < 1e-10


def test_derivative_zeroes_nyquist():
    n = 16
    x = sp.get_grid(n).nodes
    assert np.max(np.abs(sp.spectral_derivative(np.cos(8 * x)))) < 1e-13


def test_antiderivative_inverts_derivative(rng):
    f = random_band_limited(64, rng)
    assert np.max(np.abs(sp.antiderivative(sp.spectral_derivative(f)) - f)) < 1e-12
    assert np.max(np.abs(sp.spectral_derivative(sp.antiderivative(f)) - f)) < 1e-12


def test_antiderivative_rejects_nonzero_mean():
    with pytest.raises(sp.SpectralError):
        sp.antiderivative(np.ones(16))


def test_filter_properties():
    filt = sp.FilterSpec()
    x = np.linspace(-np.pi, np.pi, 2001)
    r = filt.rho(x)
    assert np.all(r[np.abs(x) <= filt.mu * np.pi] == 1.0)
    assert abs(filt.rho(np.pi)) < 1e-15
    # even, monotone on [0, pi], zero slope at pi
    assert np.allclose(r, r[::-1])
    pos = r[x >= 0]
    assert np.all(np.diff(pos) <= 1e-15)
    eps = 1e-4
    assert abs((filt.rho(np.pi) - filt.rho(np.pi - eps)) / eps) < 1e-6


def test_filter_bad_cutoff():
    with pytest.raises(sp.SpectralError):
        sp.FilterSpec(mu=1.2)


def test_filtered_derivative_equals_derivative_in_band():
    n = 64
    x = sp.get_grid(n).nodes
    f = np.sin(3 * x) + 0.2 * np.cos(10 * x)
    assert np.max(np.abs(sp.filtered_derivative(f) - sp.spectral_derivative(f))) < 1e-13


def test_grid_rejects_odd_sizes():
    with pytest.raises(sp.SpectralError):
        sp.get_grid(15)
    with pytest.raises(sp.SpectralError):
        sp.get_grid(6)


def test_alternate_point_aliasing_example():
    """Top-mode input to the alternate-point sum lands on the mirrored mode."""
    n = 32
    grid = sp.get_grid(n)
    x = grid.nodes
    g = np.exp(2j * x)
    phi = np.exp(1j * x * (n // 2 - 1))
    out = np.empty(n, dtype=complex)
    for i in range(n):
        with np.errstate(divide="ignore", invalid="ignore"):
            row = (g[i] - g) / (2 * np.pi) / np.tan((x[i] - x) / 2)
        row[i] = np.nan  # even offset: never read
        out[i] = sp.alternate_point_sum(row, phi, i)
    expected = -2j * np.exp(1j * x * (-(n // 2) + 1))
    assert np.max(np.abs(out - expected)) < 1e-12


def test_alternate_point_sum_rejects_singular_odd_entry():
    n = 16
    row = np.ones(n)
    row[3] = np.inf  # offset 3 from i=0 is odd, so it is read
    with pytest.raises(sp.NumericalSingularityError):
        sp.alternate_point_sum(row, np.ones(n), 0)


def test_alternate_point_apply_matches_rowwise(rng):
    n = 16
    k = rng.standard_normal((n, n))
    f = rng.standard_normal(n)
    full = sp.alternate_point_apply(k, f)
    rows = np.array([sp.alternate_point_sum(k[i], f, i) for i in range(n)])
    assert np.max(np.abs(full - rows)) < 1e-14


def test_commutator_is_smoothing():
    n = 128
    x = sp.get_grid(n).nodes
    phi = np.exp(-1j * (x + 0.3 * np.sin(x)))
    psi = np.exp(1j * 40 * x)
    comm = sp.hilbert_commutator(phi, psi)
    # the high-frequency factor is removed: result is tiny compared with psi
    assert np.max(np.abs(comm)) < 1e-6


def test_restrict_prolong():
    x64 = sp.get_grid(64).nodes
    f = np.exp(np.cos(x64))
    r = sp.restrict(f, 32)
    assert np.max(np.abs(r - np.exp(np.cos(sp.get_grid(32).nodes)))) < 1e-10
    assert np.max(np.abs(sp.restrict(sp.prolong(r, 64), 32) - r)) < 1e-14
    with pytest.raises(sp.SpectralError):
        sp.restrict(r, 64)


def test_trig_interpolate_reproduces_nodes_and_band():
    n = 32
    x = sp.get_grid(n).nodes
    f = np.cos(3 * x) + np.sin(5 * x)
    xs = np.linspace(-3, 3, 17)
    assert np.max(np.abs(sp.trig_interpolate(f, x) - f)) < 1e-13
    assert np.max(np.abs(sp.trig_interpolate(f, xs) - (np.cos(3 * xs) + np.sin(5 * xs)))) < 1e-13


def test_high_mode_max():
    n = 64
    x = sp.get_grid(n).nodes
    f = np.cos(2 * x) + 1e-5 * np.cos(30 * x)
    assert abs(sp.high_mode_max(f, 2 / 3) - 0.5e-5) < 1e-15


@given(st.integers(min_value=4, max_value=64).map(lambda m: 2 * m), st.integers(0, 2**32 - 1))
def test_hilbert_square_property(n, seed):
    f = random_band_limited(n, np.random.default_rng(seed))
    assert np.max(np.abs(sp.hilbert_transform(sp.hilbert_transform(f)) + f)) < 1e-11


@given(st.integers(0, 2**32 - 1))
def test_parseval_property(seed):
    f = random_band_limited(128, np.random.default_rng(seed), complex_out=True)
    lhs = np.mean(np.abs(f) ** 2)
    rhs = np.sum(np.abs(sp.dft(f)) ** 2)
    assert abs(lhs - rhs) < 1e-12 * max(1.0, lhs)
