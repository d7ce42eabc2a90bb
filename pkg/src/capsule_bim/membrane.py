"""Membrane tension and the interfacial forcing ``g``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral as sp
from .interface import InterfaceState, reconstruct_tau

__all__ = [
    "MembraneParams",
    "Forcing",
    "MapDegeneracyError",
    "stretch_tension",
    "membrane_tension",
    "assemble_forcing",
    "compute_forcing",
]


class MapDegeneracyError(ArithmeticError):
    """The backward map lost monotonicity (``D_h alpha0 <= 0`` somewhere)."""


@dataclass(frozen=True, eq=False)
class MembraneParams:
    """Membrane constitutive parameters.

    Parameters
    ----------
    kappa_b : float
        Bending modulus, nonnegative.
    mode : {"hookean", "constant"}
        Hookean tension from the backward map, or a constant tension.
    s0 : float or ndarray
        Initial Hookean tension profile ``S_0`` on the initial grid.
    tension : float
        Tension value for ``mode="constant"``.
    sigma0 : float
        Initial arclength metric ``sigma(0)``.
    """

    kappa_b: float = 0.0
    mode: str = "hookean"
    s0: float | np.ndarray = 0.0
    tension: float = 1.0
    sigma0: float = 1.0

    def __post_init__(self):
        if self.kappa_b < 0:
            raise ValueError("bending modulus must be nonnegative")
        if self.mode not in ("hookean", "constant"):
            raise ValueError(f"unknown tension mode {self.mode!r}")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        if self.mode == "hookean" and np.any(1.0 + np.asarray(self.s0) <= 0):
            raise ValueError("hookean initial tension needs 1 + S0 > 0 everywhere")

    @property
    def s0_is_uniform(self) -> bool:
        s0 = np.asarray(self.s0, dtype=float)
        return s0.ndim == 0 or np.ptp(s0) == 0.0


@dataclass(frozen=True, eq=False)
class Forcing:
    """Right-hand side of the density equation.

    ``g`` uses ``S_h^2`` in the bending term, ``g_filtered`` uses ``D_h^2``.
    """

    g: np.ndarray
    g_filtered: np.ndarray
    tension: np.ndarray


def stretch_tension(
    state: InterfaceState,
    params: MembraneParams,
    filt: sp.FilterSpec | None = sp.DEFAULT_FILTER,
) -> np.ndarray:
    """Hookean tension ``sigma / (sigma0 D_h alpha0) (1 + S0(alpha0)) - 1``.

    ``filt=None`` replaces ``D_h`` by ``S_h`` (unfiltered transport).
    A non-uniform ``S0`` is evaluated at ``alpha0_i`` by trigonometric
    interpolation of its initial-grid samples.
    """
    a = state.alpha0
    da = sp.spectral_derivative(a) if filt is None else sp.filtered_derivative(a, filt)
    slope = 1.0 + da
    if np.any(slope <= 0):
        i = int(np.argmin(slope))
        raise MapDegeneracyError(f"backward map slope {slope[i]:.3e} <= 0 at node {i}")
    s0 = np.asarray(params.s0, dtype=float)
    if params.s0_is_uniform:
        s0_at = np.full(state.n, float(s0.flat[0]))
    else:
        if s0.size != state.n:
            raise ValueError(f"S0 profile has {s0.size} samples, grid has {state.n}")
        # the periodic part of alpha0 is sampled; interpolate S0 at alpha + a
        s0_at = sp.trig_interpolate(s0, state.grid.nodes + a)
    return state.sigma / (params.sigma0 * slope) * (1.0 + s0_at) - 1.0


def membrane_tension(state: InterfaceState, params: MembraneParams, filt=sp.DEFAULT_FILTER) -> np.ndarray:
    if params.mode == "constant":
        return np.full(state.n, float(params.tension))
    return stretch_tension(state, params, filt)


def assemble_forcing(
    state: InterfaceState,
    tension: np.ndarray,
    flow,
    kappa_b: float,
    filt: sp.FilterSpec | None = None,
    tau: np.ndarray | None = None,
    h_term: complex = 0.0,
) -> np.ndarray:
    """Forcing sequence ``g_i``.

    ``g = -(chi/2)(S e^{i theta} - (kappa_B/sigma^2)(D theta) i e^{i theta})
    - beta (B - iQ) conj(tau) - 2 beta H`` where ``D`` is ``S_h^2`` when ``filt``
    is None and ``D_h^2`` otherwise. The second derivative acts on the periodic
    part only, since that of ``W alpha`` vanishes.
    """
    p = state.theta_periodic
    if filt is None:
        d2 = sp.spectral_derivative(sp.spectral_derivative(p))
    else:
        d2 = sp.filtered_derivative(sp.filtered_derivative(p, filt), filt)
    e = state.tangent
    g = -0.5 * flow.chi * (tension * e - (kappa_b / state.sigma**2) * d2 * 1j * e)
    if flow.beta != 0.0:
        if tau is None:
            tau = reconstruct_tau(state)
        g = g - flow.beta * (flow.B - 1j * flow.Q) * np.conj(tau) - 2 * flow.beta * h_term
    return g


def compute_forcing(
    state: InterfaceState,
    params: MembraneParams,
    flow,
    filt: sp.FilterSpec = sp.DEFAULT_FILTER,
    *,
    filter_forcing: bool = True,
    filter_tension: bool = True,
    tau: np.ndarray | None = None,
) -> Forcing:
    """Tension plus the unfiltered and (optionally) filtered forcing."""
    tension = membrane_tension(state, params, filt if filter_tension else None)
    g = assemble_forcing(state, tension, flow, params.kappa_b, None, tau)
    if filter_forcing and params.kappa_b != 0.0:
        gp = assemble_forcing(state, tension, flow, params.kappa_b, filt, tau)
    else:
        gp = g
    return Forcing(g=g, g_filtered=gp, tension=tension)
