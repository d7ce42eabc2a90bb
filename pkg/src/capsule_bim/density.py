"""Discrete Sherman-Lauricella system for the complex density.

The unknown is split as ``omega = omega_tilde + g`` and ``omega_tilde`` solves

    (I + beta K) omega_tilde = -beta K g^p

with ``K`` the alternate-point discretization of the double-layer-type
kernels. In complex form

    (K w)_i = 2h sum_{j-i odd} [ K1_ij w_j + C_ij conj(w_j) ]

where ``K1 = (1/pi) Im(tau'_j / (tau_j - tau_i)) + sigma`` and ``C`` is the
conjugate-density kernel; the real 2x2 block form is ``[[K1 + Re C, Im C],
[Im C, K1 - Re C]]``. The ``+ sigma`` entry is the discrete ``2 beta H``
deflation that lifts the rank deficiency as ``lambda -> 0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import spectral as sp
from .interface import InterfaceState, reconstruct_tau

__all__ = [
    "FlowConfig",
    "BoundaryGeometry",
    "DensitySolution",
    "GeometryDegeneracyError",
    "SolverFailureError",
    "apply_K",
    "K_matrix",
    "solve_density",
]

log = logging.getLogger(__name__)


class GeometryDegeneracyError(ArithmeticError):
    """Two distinct nodes coincide."""


class SolverFailureError(RuntimeError):
    def __init__(self, message: str, condition: float = np.inf):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


@dataclass(frozen=True)
class FlowConfig:
    """Far-field coefficients and viscosity ratio.

    The far field is ``u = [[Q, B + G/2], [B - G/2, -Q]] x``; pure strain has
    ``B = G = 0`` and simple shear ``Q = 0, G = 2B``.
    """

    Q: float = 0.0
    B: float = 0.0
    G: float = 0.0
    lam: float = 1.0

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"viscosity ratio must be nonnegative, got {self.lam}")

    @property
    def beta(self) -> float:
        return (1.0 - self.lam) / (1.0 + self.lam)

    @property
    def chi(self) -> float:
        return 1.0 / (1.0 + self.lam)

    def far_field(self, tau: np.ndarray) -> np.ndarray:
        return (self.Q + 1j * self.B) * np.conj(tau) - 0.5j * self.G * tau

    @property
    def rate_scale(self) -> float:
        return max(abs(self.Q), abs(self.B), abs(self.G))


class BoundaryGeometry:
    """Node positions and alternate-point kernel matrices for one state.

    Matrices are dense ``(N, N)`` arrays with entries at even offsets set to
    zero. ``S_h tau`` is taken as ``sigma e^{i theta}``. Passing ``smooth``
    evaluates every kernel on the curve with filtered tangent angle.
    """

    def __init__(
        self,
        state: InterfaceState,
        tau: np.ndarray | None = None,
        smooth: sp.FilterSpec | None = None,
    ):
        self.state = state
        self.n = state.n
        self.h = state.grid.mesh
        self.sigma = state.sigma
        self.smooth = smooth
        # With ``smooth`` the kernels see the curve rebuilt from the filtered
        # tangent angle; the state itself is untouched.
        shape = state if smooth is None else state.replace(
            theta_periodic=sp.apply_filter(state.theta_periodic, smooth)
        )
        if tau is None:
            tau = reconstruct_tau(state)
        self.nodes = tau
        self.tau = tau if smooth is None else reconstruct_tau(shape)
        self.tau_alpha = state.sigma * shape.tangent
        self.mask = sp.odd_offset_mask(self.n)
        diff = self.tau[None, :] - self.tau[:, None]
        if np.any(np.abs(diff[self.mask]) <= 1e-14 * max(1.0, self.sigma)):
            i, j = np.argwhere(self.mask & (np.abs(diff) <= 1e-14 * max(1.0, self.sigma)))[0]
            raise GeometryDegeneracyError(f"nodes {i} and {j} coincide")
        # dummy value off the stencil keeps the divisions finite
        self.delta = np.where(self.mask, diff, 1.0)

    @cached_property
    def cauchy(self) -> np.ndarray:
        """``tau'_j / (tau_j - tau_i)`` on the stencil."""
        return np.where(self.mask, self.tau_alpha[None, :] / self.delta, 0.0)

    @cached_property
    def conjugate_kernel(self) -> np.ndarray:
        """``tau'_j / conj(D) - D conj(tau'_j) / conj(D)^2`` with ``D = tau_j - tau_i``."""
        d = self.delta
        dc = np.conj(d)
        ta = self.tau_alpha[None, :]
        return np.where(self.mask, ta / dc - d * np.conj(ta) / dc**2, 0.0)

    def k1(self, deflation: bool = True) -> np.ndarray:
        out = np.imag(self.cauchy) / np.pi
        if deflation:
            out = out + np.where(self.mask, self.sigma, 0.0)
        return out

    @cached_property
    def k_conj(self) -> np.ndarray:
        return self.conjugate_kernel / (2j * np.pi)

    @cached_property
    def g1(self) -> np.ndarray:
        """Regularized Cauchy kernel ``2 Re(tau'_j / D) + cot((alpha_i - alpha_j)/2)``."""
        cot = sp._cotangent_matrix(self.n)
        return np.where(self.mask, 2 * np.real(self.cauchy) + cot, 0.0)

    @property
    def g2(self) -> np.ndarray:
        return self.conjugate_kernel


def _geometry(obj) -> BoundaryGeometry:
    return obj if isinstance(obj, BoundaryGeometry) else BoundaryGeometry(obj)


def _row_sum(kernel: np.ndarray, f: np.ndarray) -> np.ndarray:
    return (kernel * f[None, :]).sum(axis=1)


def apply_K(state, w, deflation: bool = True) -> np.ndarray:
    """Matrix-free ``K w`` for a complex grid sequence ``w``."""
    geom = _geometry(state)
    w = np.asarray(w, dtype=complex)
    two_h = 2 * geom.h
    return two_h * (_row_sum(geom.k1(deflation), w) + _row_sum(geom.k_conj, np.conj(w)))


def K_matrix(state, deflation: bool = True) -> np.ndarray:
    """Real ``(2N, 2N)`` matrix of ``K`` acting on ``[Re w, Im w]``."""
    geom = _geometry(state)
    k1 = geom.k1(deflation)
    cr, ci = geom.k_conj.real, geom.k_conj.imag
    two_h = 2 * geom.h
    return two_h * np.block([[k1 + cr, ci], [ci, k1 - cr]])


@dataclass(frozen=True, eq=False)
class DensitySolution:
    """Density split ``omega = omega_tilde + g``, ``omega^p = omega_tilde + g^p``.

    ``pressure`` is the interior-pressure multiplier of the bordered solve used
    for an inviscid interior (``beta = 1``); it is zero otherwise.
    """

    omega_tilde: np.ndarray
    omega: np.ndarray
    omega_filtered: np.ndarray
    residual: float
    iterations: int
    method: str
    pressure: float = 0.0


def _l2(f: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(f) ** 2) * (2 * np.pi / f.size)))


def _bubble_solve(geom: BoundaryGeometry, rhs: np.ndarray, scale: float):
    """Doubly bordered solve for ``beta = 1``.

    With an inviscid interior the interior pressure is an unknown: it adds
    ``p i tau`` to the integrated stress, and ``i tau`` is also a null vector
    of ``I + K`` (a uniform pressure moves no fluid). The constant null modes
    are removed by the deflation term, which the caller forces on.

    The alternate-point rule adds one more near-null vector: it maps
    ``(-1)^j f_j`` to ``-(-1)^i (K f)_i``, so the expansion mode ``tau``
    (eigenvalue +1) has a grid-scale partner ``(-1)^j tau_j`` with
    eigenvalue close to -1. Its singular value drifts from 0 on a circle to
    small nonzero values on deformed shapes, which makes any truncation rule
    switch discontinuously. Both vectors are therefore bordered explicitly:

        (I + K) w - p v1 - q v2 = rhs,   <v1, w> = 0,   <v2, w> = 0

    with ``v1 = i tau`` and ``v2 = (-1)^j tau_j`` in real form. The second
    multiplier ``q`` is spectrally small for smooth data.
    """
    n = geom.n
    mat = np.eye(2 * n) + K_matrix(geom, deflation=True)

    def unit(v):
        r = np.concatenate([v.real, v.imag])
        return r / np.linalg.norm(r)

    v1 = unit(1j * geom.tau)
    v2 = unit((-1.0) ** np.arange(n) * geom.tau)
    border = np.column_stack([v1, v2])
    a = np.block([[mat, -border], [border.T, np.zeros((2, 2))]])
    b = np.concatenate([rhs.real, rhs.imag, [0.0, 0.0]])
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SolverFailureError(f"bordered solve failed: {exc}", np.linalg.cond(a)) from exc
    r = a @ x - b
    r = r[:n] + 1j * r[n : 2 * n]
    wt = x[:n] + 1j * x[n : 2 * n]
    return wt, float(x[2 * n]), _l2(r) / scale


def solve_density(
    state,
    forcing,
    flow: FlowConfig,
    tol: float = 1e-13,
    max_iter: int = 200,
    *,
    deflation: bool = False,
    method: str = "auto",
    stall_limit: int = 5,
    direct_threshold: float = 0.5,
) -> DensitySolution:
    """Solve ``(I + beta K) omega_tilde = -beta K g^p``.

    ``method="auto"`` runs successive approximations
    ``omega_tilde <- -beta K (omega_tilde + g^p)`` from zero and falls back to a
    dense direct solve when ``|beta| >= direct_threshold``, when the residual
    fails to decrease ``stall_limit`` times in a row, or when ``max_iter`` is
    exhausted. ``residual`` is relative to ``||beta K g^p||``.

    ``deflation`` adds the discrete ``2 beta H`` term to ``K``. It is off by
    default (``H = 0``), and always on for ``beta = 1``, where the system is
    solved in bordered form (see :func:`_bubble_solve`).

    Raises
    ------
    SolverFailureError
        The direct solve is singular or does not reach ``tol``.
    """
    beta = flow.beta
    g, gp = forcing.g, forcing.g_filtered
    if beta == 0.0:
        zero = np.zeros(g.size, dtype=complex)
        return DensitySolution(zero, g.copy(), gp.copy(), 0.0, 0, "fixed_point")

    geom = _geometry(state)
    bubble = beta >= 1.0 - 1e-12
    if bubble:
        deflation = True
    rhs = -beta * apply_K(geom, gp, deflation)
    scale = _l2(rhs)
    if scale == 0.0:
        zero = np.zeros(g.size, dtype=complex)
        return DensitySolution(zero, g.copy(), gp.copy(), 0.0, 0, "fixed_point")

    def finish(wt, res, its, how, pressure=0.0):
        return DensitySolution(wt, wt + g, wt + gp, res, its, how, pressure)

    if bubble:
        wt, pressure, res = _bubble_solve(geom, rhs, scale)
        if not res < max(tol, 1e-10):
            raise SolverFailureError(f"bordered solve residual {res:.3e} exceeds tolerance")
        return finish(wt, res, 0, "direct", pressure)

    use_direct = method == "direct" or (method == "auto" and abs(beta) >= direct_threshold)
    iterations = 0
    res = np.inf
    if not use_direct:
        wt = np.zeros(g.size, dtype=complex)
        best = np.inf
        stalls = 0
        for iterations in range(1, max_iter + 1):
            nxt = -beta * apply_K(geom, wt + gp, deflation)
            res = _l2(wt - nxt) / scale
            if res < tol:
                return finish(wt, res, iterations - 1, "fixed_point")
            if not np.isfinite(res):
                break
            stalls = stalls + 1 if res >= best else 0
            best = min(best, res)
            wt = nxt
            if stalls >= stall_limit:
                break
        if method == "fixed_point":
            raise SolverFailureError(f"successive approximations did not converge (residual {res:.3e})")
        log.debug("fixed point stopped after %d iterations, switching to direct solve", iterations)

    n = g.size
    mat = np.eye(2 * n) + beta * K_matrix(geom, deflation)
    b = np.concatenate([rhs.real, rhs.imag])
    try:
        x = np.linalg.solve(mat, b)
    except np.linalg.LinAlgError as exc:
        raise SolverFailureError(f"direct solve failed: {exc}", np.linalg.cond(mat)) from exc
    wt = x[:n] + 1j * x[n:]
    res = _l2(wt + beta * apply_K(geom, wt + gp, deflation)) / scale
    if not res < tol:
        # one step of iterative refinement
        r = -(wt + beta * apply_K(geom, wt + gp, deflation))
        dx = np.linalg.solve(mat, np.concatenate([r.real, r.imag]))
        wt = wt + dx[:n] + 1j * dx[n:]
        res = _l2(wt + beta * apply_K(geom, wt + gp, deflation)) / scale
    if not np.isfinite(res) or res > max(tol, 1e-10):
        raise SolverFailureError(f"direct solve residual {res:.3e} exceeds tolerance", np.linalg.cond(mat))
    return finish(wt, res, iterations, "direct")
