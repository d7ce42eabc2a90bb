"""Periodic spectral calculus on a uniform grid.

Grid sequences are 1-D numpy arrays of length ``N`` ordered by node index
``j = -N/2+1, ..., N/2`` (array position ``0`` holds ``j = -N/2+1``).
Fourier coefficients use the asymmetric band ``k = -N/2+1, ..., N/2``.

All Fourier-multiplier operators are applied with ``numpy.fft``; the node
offset only contributes a phase that cancels for multipliers, so it matters
only in :func:`dft` / :func:`idft`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

__all__ = [
    "SpectralGrid",
    "FilterSpec",
    "SpectralError",
    "NumericalSingularityError",
    "get_grid",
    "dft",
    "idft",
    "spectral_derivative",
    "filtered_derivative",
    "apply_filter",
    "antiderivative",
    "discrete_mean",
    "hilbert_transform",
    "hilbert_commutator",
    "alternate_point_sum",
    "alternate_point_apply",
    "odd_offset_mask",
    "trig_interpolate",
    "restrict",
    "prolong",
    "high_mode_max",
]


class SpectralError(ValueError):
    """Invalid input to a grid operator."""


class NumericalSingularityError(ArithmeticError):
    """A quadrature kernel is non-finite at an included node pair."""

    def __init__(self, i: int, j: int):
        super().__init__(f"kernel is not finite at included pair (i={i}, j={j})")
        self.pair = (i, j)


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """Uniform periodic grid on [-pi, pi) with ``n_points`` nodes.

    Attributes
    ----------
    n_points : int
        Even number of nodes, at least 8.
    mesh : float
        ``h = 2 pi / N``.
    nodes : ndarray
        ``alpha_j = j h`` for ``j = -N/2+1 ... N/2``.
    indices : ndarray
        Node indices ``j``.
    wavenumbers : ndarray
        Integer wavenumber of each ``numpy.fft`` slot, with the Nyquist slot
        carrying ``+N/2``.
    """

    n_points: int
    mesh: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)
    indices: np.ndarray = field(init=False, repr=False)
    wavenumbers: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or n < 8 or n % 2:
            raise SpectralError(f"N must be an even integer >= 8, got {n!r}")
        j = np.arange(-n // 2 + 1, n // 2 + 1)
        k = np.fft.fftfreq(n, 1.0 / n).astype(int)
        k[n // 2] = n // 2
        object.__setattr__(self, "mesh", 2 * np.pi / n)
        object.__setattr__(self, "indices", j)
        object.__setattr__(self, "nodes", j * (2 * np.pi / n))
        object.__setattr__(self, "wavenumbers", k)

    @property
    def band(self) -> np.ndarray:
        """Wavenumbers in ascending band order ``-N/2+1 ... N/2``."""
        return np.arange(-self.n_points // 2 + 1, self.n_points // 2 + 1)


@lru_cache(maxsize=64)
def get_grid(n: int) -> SpectralGrid:
    return SpectralGrid(int(n))


def _smoothstep_taper(s: np.ndarray) -> np.ndarray:
    # C^3 transition: 1 at s=0, 0 at s=1, first three derivatives vanish at both ends
    return 1.0 - s**4 * (35.0 - 84.0 * s + 70.0 * s**2 - 20.0 * s**3)


@dataclass(frozen=True)
class FilterSpec:
    """Even cutoff ``rho(x)`` on ``[-pi, pi]``, identically 1 for ``|x| <= mu pi``.

    The default taper is the complement of the order-3 smoothstep, which is
    C^3 and has ``rho(pi) = rho'(pi) = 0``. A custom ``profile`` may be given;
    it is evaluated on ``|x|``.
    """

    mu: float = 2.0 / 3.0
    profile: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if not 0.0 < self.mu < 1.0:
            raise SpectralError(f"filter cutoff mu must lie in (0, 1), got {self.mu}")

    def rho(self, x) -> np.ndarray:
        x = np.abs(np.asarray(x, dtype=float))
        if self.profile is not None:
            return np.where(x <= self.mu * np.pi, 1.0, self.profile(x))
        s = np.clip((x - self.mu * np.pi) / ((1.0 - self.mu) * np.pi), 0.0, 1.0)
        return np.where(x <= self.mu * np.pi, 1.0, _smoothstep_taper(s))

    def values(self, n: int) -> np.ndarray:
        """``rho(k h)`` in ``numpy.fft`` slot order for an ``n``-point grid."""
        return _filter_table(self, int(n))


@lru_cache(maxsize=256)
def _filter_table(spec: FilterSpec, n: int) -> np.ndarray:
    grid = get_grid(n)
    table = spec.rho(grid.wavenumbers * grid.mesh)
    table.setflags(write=False)
    return table


DEFAULT_FILTER = FilterSpec()


def _check(f) -> np.ndarray:
    f = np.asarray(f)
    if f.ndim != 1:
        raise SpectralError(f"grid sequence must be 1-D, got shape {f.shape}")
    get_grid(f.size)
    return f


def _multiply(f: np.ndarray, symbol: np.ndarray, real_out: bool) -> np.ndarray:
    out = np.fft.ifft(np.fft.fft(f) * symbol)
    if real_out and not np.iscomplexobj(f):
        return out.real
    return out


def dft(f, grid: SpectralGrid | None = None) -> np.ndarray:
    """Coefficients ``(1/N) sum_j f_j exp(-i k alpha_j)`` for ``k = -N/2+1 ... N/2``."""
    f = _check(f)
    grid = grid or get_grid(f.size)
    if grid.n_points != f.size:
        raise SpectralError(f"sequence length {f.size} does not match grid N={grid.n_points}")
    k = grid.band
    j0 = grid.indices[0]
    raw = np.fft.fft(f)[k % f.size] / f.size
    return raw * np.exp(-1j * k * j0 * grid.mesh)


def idft(coeffs, grid: SpectralGrid | None = None) -> np.ndarray:
    """Inverse of :func:`dft`; returns complex node values."""
    c = _check(coeffs)
    grid = grid or get_grid(c.size)
    k = grid.band
    j0 = grid.indices[0]
    slots = np.zeros(c.size, dtype=complex)
    slots[k % c.size] = c * np.exp(1j * k * j0 * grid.mesh)
    return np.fft.ifft(slots) * c.size


@lru_cache(maxsize=64)
def _derivative_symbol(n: int) -> np.ndarray:
    k = get_grid(n).wavenumbers
    sym = 1j * k.astype(float)
    sym[n // 2] = 0.0
    sym.setflags(write=False)
    return sym


def spectral_derivative(f) -> np.ndarray:
    """Pseudo-spectral derivative ``S_h`` with the ``k = N/2`` mode zeroed."""
    f = _check(f)
    return _multiply(f, _derivative_symbol(f.size), real_out=True)


def filtered_derivative(f, filt: FilterSpec = DEFAULT_FILTER) -> np.ndarray:
    """Filtered derivative ``D_h``: symbol ``i k rho(k h)`` over the full band."""
    f = _check(f)
    k = get_grid(f.size).wavenumbers
    # ik at the Nyquist slot is not Hermitian, but rho(pi) = 0 removes it
    return _multiply(f, 1j * k * filt.values(f.size), real_out=True)


def apply_filter(f, filt: FilterSpec = DEFAULT_FILTER) -> np.ndarray:
    """``f^p`` with coefficients ``rho(k h) f_k``."""
    f = _check(f)
    return _multiply(f, filt.values(f.size), real_out=True)


def discrete_mean(f):
    """Trapezoid mean ``(1/N) sum_j f_j``."""
    return np.mean(_check(f))


@lru_cache(maxsize=64)
def _antiderivative_symbol(n: int) -> np.ndarray:
    k = get_grid(n).wavenumbers.astype(float)
    sym = np.zeros(n, dtype=complex)
    nz = (k != 0) & (np.abs(k) != n // 2)
    sym[nz] = 1.0 / (1j * k[nz])
    sym.setflags(write=False)
    return sym


def antiderivative(f, *, mean_tol: float = 1e-12) -> np.ndarray:
    """Zero-mean antiderivative ``S_h^{-1}``.

    The Nyquist coefficient is dropped as well, which makes this the exact
    inverse of :func:`spectral_derivative` on its range and keeps real input
    real.

    Raises
    ------
    SpectralError
        If the discrete mean of ``f`` exceeds ``mean_tol * max(1, ||f||)``.
    """
    f = _check(f)
    scale = max(1.0, float(np.sqrt(np.mean(np.abs(f) ** 2))))
    if abs(np.mean(f)) > mean_tol * scale:
        raise SpectralError(f"antiderivative needs zero-mean input, mean = {np.mean(f):.3e}")
    return _multiply(f, _antiderivative_symbol(f.size), real_out=True)


@lru_cache(maxsize=64)
def _hilbert_symbol(n: int) -> np.ndarray:
    k = get_grid(n).wavenumbers
    sym = -1j * np.sign(k).astype(complex)
    sym[n // 2] = 0.0
    sym.setflags(write=False)
    return sym


@lru_cache(maxsize=32)
def odd_offset_mask(n: int) -> np.ndarray:
    """Boolean ``(N, N)`` mask of pairs ``(i, j)`` with ``j - i`` odd."""
    i = np.arange(n)
    mask = (i[:, None] - i[None, :]) % 2 == 1
    mask.setflags(write=False)
    return mask


@lru_cache(maxsize=32)
def _cotangent_matrix(n: int) -> np.ndarray:
    grid = get_grid(n)
    mask = odd_offset_mask(n)
    diff = grid.nodes[:, None] - grid.nodes[None, :]
    cot = np.zeros((n, n))
    cot[mask] = 1.0 / np.tan(diff[mask] / 2.0)
    cot.setflags(write=False)
    return cot


def hilbert_transform(f, method: str = "fft", zero_nyquist_input: bool = False) -> np.ndarray:
    """Discrete Hilbert transform ``H_h``.

    ``method="sum"`` evaluates the alternate-point cotangent sum
    ``(h/pi) sum_{j-i odd} f_j cot((alpha_i - alpha_j)/2)``. ``method="fft"``
    applies the symbol ``-i sgn(k)`` with the ``k = 0`` and ``k = N/2``
    entries set to zero, which is the exact eigenvalue set of the cotangent
    sum, so both agree for every input up to rounding.
    """
    f = _check(f)
    if zero_nyquist_input:
        f = _multiply(f, _nyquist_killer(f.size), real_out=True)
    if method == "fft":
        return _multiply(f, _hilbert_symbol(f.size), real_out=True)
    if method == "sum":
        h = 2 * np.pi / f.size
        return (h / np.pi) * alternate_point_apply(_cotangent_matrix(f.size), f) / (2 * h)
    raise SpectralError(f"unknown Hilbert method {method!r}")


@lru_cache(maxsize=64)
def _nyquist_killer(n: int) -> np.ndarray:
    sym = np.ones(n)
    sym[n // 2] = 0.0
    return sym


def hilbert_commutator(phi, psi, method: str = "fft") -> np.ndarray:
    """``[H_h, phi](psi) = H_h(phi psi) - phi H_h(psi)``."""
    phi = _check(phi)
    psi = _check(psi)
    return hilbert_transform(phi * psi, method) - phi * hilbert_transform(psi, method)


def alternate_point_sum(kernel_row, f, i: int):
    """Alternate-point trapezoid ``sum_{(j-i) odd} K_ij f_j (2h)`` at one target.

    Parameters
    ----------
    kernel_row : callable or array
        Either ``j -> K_ij`` accepting an index array, or a length-``N`` row.
        Entries at even offsets are never read.
    f : array
        Grid sequence.
    i : int
        Target array position.
    """
    f = _check(f)
    n = f.size
    js = np.arange((i + 1) % 2, n, 2)
    if callable(kernel_row):
        k = np.asarray(kernel_row(js))
    else:
        k = np.asarray(kernel_row)[js]
    bad = ~np.isfinite(k)
    if np.any(bad):
        raise NumericalSingularityError(i, int(js[np.argmax(bad)]))
    return np.sum(k * f[js]) * (2 * (2 * np.pi / n))


def alternate_point_apply(kernel: np.ndarray, f) -> np.ndarray:
    """Apply the alternate-point rule at every target for a dense kernel matrix.

    Entries of ``kernel`` at even offsets are ignored. Summation order is fixed
    (row-wise numpy reduction), so results are bit-reproducible.
    """
    f = _check(f)
    n = f.size
    mask = odd_offset_mask(n)
    kernel = np.where(mask, kernel, 0.0)
    if not np.all(np.isfinite(kernel)):
        i, j = np.argwhere(~np.isfinite(kernel))[0]
        raise NumericalSingularityError(int(i), int(j))
    return (kernel * f[None, :]).sum(axis=1) * (4 * np.pi / n)


def trig_interpolate(f, x) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``f`` at arbitrary points ``x``.

    The Nyquist coefficient is split evenly between ``+-N/2`` so real data give
    a real interpolant.
    """
    f = _check(f)
    n = f.size
    grid = get_grid(n)
    c = dft(f, grid)
    k = grid.band.astype(float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    body = np.exp(1j * np.outer(x, k[:-1])) @ c[:-1]
    nyq = c[-1] * np.cos(n / 2 * x)
    out = body + nyq
    if not np.iscomplexobj(f):
        return out.real
    return out


def restrict(f, n: int) -> np.ndarray:
    """Trigonometric restriction of ``f`` to the ``n``-point grid.

    The spectrum is truncated to the coarse band; the two fine coefficients at
    ``k = +-n/2`` coincide on the coarse nodes and are summed into the coarse
    Nyquist slot. For ``n`` dividing ``f.size`` the coarse nodes are a subset of
    the fine nodes, so this equals sampling the truncated interpolant there.
    """
    f = _check(f)
    m, n = f.size, int(n)
    if n > m:
        raise SpectralError(f"cannot restrict {m} points to {n}")
    fine, coarse = get_grid(m), get_grid(n)
    c = dft(f, fine)
    pos = {int(k): i for i, k in enumerate(fine.band)}
    out = np.array([c[pos[int(k)]] for k in coarse.band])
    if n < m:
        out[-1] += c[pos[-n // 2]]
    vals = idft(out, coarse)
    return vals if np.iscomplexobj(f) else vals.real


def prolong(f, m: int) -> np.ndarray:
    """Zero-padded trigonometric interpolant of ``f`` on the ``m``-point grid.

    The Nyquist coefficient is split evenly between ``+-N/2``.
    """
    f = _check(f)
    n, m = f.size, int(m)
    if m < n:
        raise SpectralError(f"cannot prolong {n} points to {m}")
    coarse, fine = get_grid(n), get_grid(m)
    c = dft(f, coarse)
    pos = {int(k): i for i, k in enumerate(fine.band)}
    out = np.zeros(m, dtype=complex)
    for k, ck in zip(coarse.band, c):
        if k == n // 2 and m > n:
            out[pos[n // 2]] += 0.5 * ck
            out[pos[-n // 2]] += 0.5 * ck
        else:
            out[pos[int(k)]] += ck
    vals = idft(out, fine)
    return vals if np.iscomplexobj(f) else vals.real


def high_mode_max(f, mu: float) -> float:
    """``max_{|k h| > mu pi} |f_k|`` over the band."""
    f = _check(f)
    grid = get_grid(f.size)
    c = dft(f, grid)
    sel = np.abs(grid.band * grid.mesh) > mu * np.pi
    return float(np.max(np.abs(c[sel]))) if np.any(sel) else 0.0
