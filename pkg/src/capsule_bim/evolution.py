"""Semi-discrete right-hand side and time integration.

The unknowns ``(p, sigma, a, tau_c)`` of :class:`InterfaceState` evolve by

    p_t     = (S_h u_n + phi_s S_h theta) / sigma
    sigma_t = -<u_n S_h theta>
    a_t     = (D_h alpha0) (phi_s - u_s) / sigma
    tau_c_t = <v>,   v = (u_n i + phi_s) e^{i theta}

where ``alpha0 = alpha + a``. Two integrators are provided: classical RK4 on
all unknowns, and an integrating-factor RK4 that treats the leading bending
symbol ``-(chi kappa_B / 2 sigma^3)|k|^3`` of the ``theta`` equation exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import spectral as sp
from .density import BoundaryGeometry, FlowConfig, solve_density
from .interface import InterfaceState, enclosed_area, perimeter
from .membrane import Forcing, MembraneParams, compute_forcing
from .velocity import interface_velocity

__all__ = [
    "FilterToggles",
    "SolverConfig",
    "IntegratorConfig",
    "StateDerivative",
    "Diagnostics",
    "Snapshot",
    "Trajectory",
    "FrameCollapseError",
    "BlowUpError",
    "StabilityGateError",
    "assemble_rhs",
    "resolve_regular",
    "bending_symbol",
    "default_dt",
    "explicit_gate",
    "step",
    "run",
    "diagnostics",
]

log = logging.getLogger(__name__)


class FrameCollapseError(ArithmeticError):
    """``sigma`` became non-positive."""


class BlowUpError(ArithmeticError):
    def __init__(self, message: str, last_time: float):
        super().__init__(f"{message} (last valid time {last_time:.6g})")
        self.last_time = last_time


class StabilityGateError(ValueError):
    """Explicit time step exceeds the bending stability gate."""


@dataclass(frozen=True)
class FilterToggles:
    """Where the filter ``rho`` is applied.

    ``forcing``: bending term of ``g^p`` uses ``D_h^2`` (off: ``g^p = g``).
    ``density``: regular kernels and the commutator use ``omega^p`` (off: ``omega``).
    ``tension``: tension and ``alpha0`` transport use ``D_h alpha0`` (off: ``S_h``).
    ``regular``: beyond the three sites above, the regular part of the scheme
    sees only filtered data: kernels are evaluated on the curve with filtered
    tangent angle and the whole of ``g^p`` is filtered. ``None`` resolves to
    on exactly when the run lies outside the analyzed regime
    (``kappa_B = 0`` or ``|beta| >= 0.5``), where the top Fourier mode
    ``N/2 - 1`` is otherwise linearly unstable. See :func:`resolve_regular`.
    ``hilbert``: also filter the leading ``H_h omega`` term. This is not part of
    the analyzed scheme and is flagged as such by the diagnose driver.
    """

    forcing: bool = True
    density: bool = True
    tension: bool = True
    regular: bool | None = None
    hilbert: bool = False

    @classmethod
    def none(cls) -> "FilterToggles":
        return cls(False, False, False, False, False)

    @property
    def analyzed(self) -> bool:
        return not self.hilbert

    def resolve(self, kappa_b: float, flow: FlowConfig) -> "FilterToggles":
        if self.regular is not None:
            return self
        return replace(self, regular=resolve_regular(kappa_b, flow))


def resolve_regular(kappa_b: float, flow: FlowConfig) -> bool:
    """Default for the ``regular`` filter site.

    Without bending there is no parabolic smoothing to absorb aliasing in the
    kernel sums, and near ``beta = 1`` the discrete kernel's dependence on the
    top geometric modes is amplified by the solve; both drive mode ``N/2 - 1``
    unstable on a circle at rest.
    """
    return kappa_b == 0.0 or abs(flow.beta) >= 0.5


@dataclass(frozen=True)
class SolverConfig:
    filt: sp.FilterSpec = sp.DEFAULT_FILTER
    toggles: FilterToggles = FilterToggles()
    tol: float = 1e-13
    max_iter: int = 200
    deflation: bool = False
    method: str = "auto"


@dataclass(frozen=True)
class IntegratorConfig:
    """Time-stepping controls.

    ``dt=None`` selects :func:`default_dt` scaled by ``cfl``. Snapshots are
    taken every ``snapshot_interval`` (defaults to ``t_end``); the step is
    shrunk so that every snapshot time is hit exactly.
    """

    scheme: str = "rk4_explicit"
    dt: float | None = None
    cfl: float = 0.25
    t_end: float = 1.0
    snapshot_interval: float | None = None
    enforce_gate: bool = True

    def __post_init__(self):
        if self.scheme not in ("rk4_explicit", "imex_bending"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.cfl > 0:
            raise ValueError("cfl factor must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be nonnegative")
        if self.snapshot_interval is not None and not self.snapshot_interval > 0:
            raise ValueError("snapshot interval must be positive")


@dataclass(frozen=True, eq=False)
class StateDerivative:
    dtheta: np.ndarray
    dsigma: float
    dalpha0: np.ndarray
    dtau_c: complex
    density_residual: float = 0.0
    imag_residue_alpha0: float = 0.0

    def axpy(self, state: InterfaceState, dt: float) -> InterfaceState:
        """``state + dt * self`` (time advanced too)."""
        return state.replace(
            theta_periodic=state.theta_periodic + dt * self.dtheta,
            sigma=state.sigma + dt * self.dsigma,
            alpha0=state.alpha0 + dt * self.dalpha0,
            tau_c=state.tau_c + dt * self.dtau_c,
            time=state.time + dt,
        )


@dataclass(frozen=True)
class Diagnostics:
    time: float
    area: float
    perimeter: float
    sigma: float
    high_mode_max: float
    density_residual: float
    alpha0_min_slope: float
    imag_residue_alpha0: float

    FIELDS = (
        "time",
        "area",
        "perimeter",
        "sigma",
        "high_mode_max",
        "density_residual",
        "alpha0_min_slope",
        "imag_residue_alpha0",
    )

    def row(self) -> tuple:
        return tuple(getattr(self, f) for f in self.FIELDS)


@dataclass(frozen=True, eq=False)
class Snapshot:
    time: float
    state: InterfaceState
    tension: np.ndarray
    diagnostics: Diagnostics


@dataclass(eq=False)
class Trajectory:
    snapshots: list = field(default_factory=list)
    history: list = field(default_factory=list)
    failure: str | None = None
    last_good_time: float = 0.0
    steps: int = 0
    dt: float = 0.0

    @property
    def completed(self) -> bool:
        return self.failure is None

    @property
    def final(self) -> InterfaceState:
        return self.snapshots[-1].state


def assemble_rhs(
    state: InterfaceState,
    membrane: MembraneParams,
    flow: FlowConfig,
    solver: SolverConfig = SolverConfig(),
) -> StateDerivative:
    """Evaluate the semi-discrete system at ``state``.

    Pipeline: tension, forcing ``(g, g^p)``, density solve, velocity with
    commutator split, ``phi_s``, then the four time derivatives.
    """
    tg = solver.toggles.resolve(membrane.kappa_b, flow)
    filt = solver.filt
    geom = BoundaryGeometry(state, smooth=filt if tg.regular else None)
    forcing = compute_forcing(
        state,
        membrane,
        flow,
        filt,
        filter_forcing=tg.forcing,
        filter_tension=tg.tension,
        tau=geom.nodes,
    )
    if tg.regular:
        forcing = Forcing(forcing.g, sp.apply_filter(forcing.g_filtered, filt), forcing.tension)
    dens = solve_density(
        geom,
        forcing,
        flow,
        tol=solver.tol,
        max_iter=solver.max_iter,
        deflation=solver.deflation,
        method=solver.method,
    )
    vel = interface_velocity(geom, dens, flow, filtered=tg.density, filter_hilbert=tg.hilbert)

    dth = state.dtheta
    dtheta = (sp.spectral_derivative(vel.u_n) + vel.phi_s * dth) / state.sigma
    dsigma = -float(np.mean(vel.u_n * dth))

    a = state.alpha0
    da = sp.filtered_derivative(a, filt) if tg.tension else sp.spectral_derivative(a)
    e = state.tangent
    bracket = (da + 1.0) / (state.sigma * e) * ((vel.phi_s - vel.u_s) * e)
    residue = float(np.max(np.abs(bracket.imag))) if bracket.size else 0.0
    dalpha0 = bracket.real
    if tg.regular:
        dtheta = sp.apply_filter(dtheta, filt)
        dalpha0 = sp.apply_filter(dalpha0, filt)
    return StateDerivative(
        dtheta=dtheta,
        dsigma=dsigma,
        dalpha0=dalpha0,
        dtau_c=vel.v0_hat,
        density_residual=dens.residual,
        imag_residue_alpha0=residue,
    )


def bending_symbol(state: InterfaceState, kappa_b: float, flow: FlowConfig) -> np.ndarray:
    """Leading linear symbol ``-(chi kappa_B / 2 sigma^3)|k|^3`` of the ``theta`` equation.

    Zero at ``k = 0`` and at ``k = N/2`` (which ``S_h`` annihilates).
    """
    k = np.abs(state.grid.wavenumbers).astype(float)
    k[state.n // 2] = 0.0
    return -(flow.chi * kappa_b / (2.0 * state.sigma**3)) * k**3


def explicit_gate(state: InterfaceState, kappa_b: float, cfl: float = 0.25) -> float:
    """Largest admissible explicit step ``cfl sigma^3 h^3 / kappa_B`` (inf if no bending)."""
    if kappa_b <= 0:
        return math.inf
    return cfl * state.sigma**3 * state.grid.mesh**3 / kappa_b


def default_dt(
    state: InterfaceState,
    membrane: MembraneParams,
    flow: FlowConfig,
    scheme: str = "rk4_explicit",
    cfl: float = 0.25,
) -> float:
    """Default step.

    Explicit bending runs use the gate ``cfl sigma^3 h^3 / kappa_B``. Otherwise
    the step is ``cfl h min(1, 1/rate)`` with ``rate`` the largest of the far
    field coefficients and the tension scale.
    """
    h = state.grid.mesh
    if scheme == "rk4_explicit" and membrane.kappa_b > 0:
        return explicit_gate(state, membrane.kappa_b, cfl)
    s_scale = abs(membrane.tension) if membrane.mode == "constant" else float(np.max(1.0 + np.abs(membrane.s0)))
    rate = max(flow.rate_scale, s_scale, 1e-300)
    return cfl * h * min(1.0, 1.0 / rate)


Evaluator = Callable[[InterfaceState], StateDerivative]


def _rk4(state: InterfaceState, f: Evaluator, dt: float) -> tuple[InterfaceState, StateDerivative]:
    k1 = f(state)
    k2 = f(k1.axpy(state, dt / 2))
    k3 = f(k2.axpy(state, dt / 2))
    k4 = f(k3.axpy(state, dt))
    out = state.replace(
        theta_periodic=state.theta_periodic
        + dt / 6 * (k1.dtheta + 2 * k2.dtheta + 2 * k3.dtheta + k4.dtheta),
        sigma=state.sigma + dt / 6 * (k1.dsigma + 2 * k2.dsigma + 2 * k3.dsigma + k4.dsigma),
        alpha0=state.alpha0 + dt / 6 * (k1.dalpha0 + 2 * k2.dalpha0 + 2 * k3.dalpha0 + k4.dalpha0),
        tau_c=state.tau_c + dt / 6 * (k1.dtau_c + 2 * k2.dtau_c + 2 * k3.dtau_c + k4.dtau_c),
        time=state.time + dt,
    )
    return out, k1


def _if_rk4(
    state: InterfaceState, f: Evaluator, dt: float, symbol: np.ndarray
) -> tuple[InterfaceState, StateDerivative]:
    """Lawson integrating-factor RK4 on ``p``; plain RK4 on the other unknowns.

    The symbol is frozen at the start of the step. The explicit part is
    ``f - L p`` so the scheme stays consistent for any frozen ``sigma``.
    """

    def lin(p):
        return sp._multiply(p, symbol, real_out=True)

    def prop(p, t):
        return sp._multiply(p, np.exp(symbol * t), real_out=True)

    def stage(s):
        d = f(s)
        return d, d.dtheta - lin(s.theta_periodic)

    p0 = state.theta_periodic
    k1, n1 = stage(state)
    s2 = k1.axpy(state, dt / 2).replace(theta_periodic=prop(p0 + dt / 2 * n1, dt / 2))
    k2, n2 = stage(s2)
    s3 = k2.axpy(state, dt / 2).replace(theta_periodic=prop(p0, dt / 2) + dt / 2 * n2)
    k3, n3 = stage(s3)
    s4 = k3.axpy(state, dt).replace(theta_periodic=prop(p0, dt) + dt * prop(n3, dt / 2))
    k4, n4 = stage(s4)
    p_new = prop(p0, dt) + dt / 6 * (prop(n1, dt) + 2 * prop(n2 + n3, dt / 2) + n4)
    out = state.replace(
        theta_periodic=p_new,
        sigma=state.sigma + dt / 6 * (k1.dsigma + 2 * k2.dsigma + 2 * k3.dsigma + k4.dsigma),
        alpha0=state.alpha0 + dt / 6 * (k1.dalpha0 + 2 * k2.dalpha0 + 2 * k3.dalpha0 + k4.dalpha0),
        tau_c=state.tau_c + dt / 6 * (k1.dtau_c + 2 * k2.dtau_c + 2 * k3.dtau_c + k4.dtau_c),
        time=state.time + dt,
    )
    return out, k1


def _check(new: InterfaceState, old: InterfaceState) -> None:
    if not (
        np.all(np.isfinite(new.theta_periodic))
        and np.all(np.isfinite(new.alpha0))
        and np.isfinite(new.sigma)
        and np.isfinite(new.tau_c)
    ):
        raise BlowUpError("non-finite state after step", old.time)
    if not new.sigma > 0:
        raise FrameCollapseError(f"sigma = {new.sigma:.3e} after step from t = {old.time:.6g}")


def step(
    state: InterfaceState,
    rhs: Evaluator,
    integrator: IntegratorConfig,
    dt: float,
    *,
    kappa_b: float = 0.0,
    flow: FlowConfig | None = None,
) -> tuple[InterfaceState, StateDerivative]:
    """Advance one step of size ``dt``.

    Returns the new state and the derivative at the old state (first stage),
    which carries the density residual used in diagnostics.

    Raises
    ------
    BlowUpError
        NaN or inf appeared.
    FrameCollapseError
        ``sigma <= 0`` after the step.
    """
    try:
        if integrator.scheme == "imex_bending" and kappa_b > 0:
            symbol = bending_symbol(state, kappa_b, flow or FlowConfig())
            new, d0 = _if_rk4(state, rhs, dt, symbol)
        else:
            new, d0 = _rk4(state, rhs, dt)
    except (FloatingPointError, OverflowError, ValueError) as exc:
        if isinstance(exc, ValueError) and "sigma must be positive" in str(exc):
            raise FrameCollapseError(str(exc)) from exc
        if isinstance(exc, ValueError) and not isinstance(exc, sp.SpectralError):
            raise
        raise BlowUpError(f"step failed: {exc}", state.time) from exc
    _check(new, state)
    return new, d0


def diagnostics(
    state: InterfaceState,
    deriv: StateDerivative | None = None,
    filt: sp.FilterSpec = sp.DEFAULT_FILTER,
) -> Diagnostics:
    slope = 1.0 + sp.filtered_derivative(state.alpha0, filt)
    return Diagnostics(
        time=state.time,
        area=enclosed_area(state),
        perimeter=perimeter(state),
        sigma=state.sigma,
        high_mode_max=sp.high_mode_max(state.theta_periodic, filt.mu),
        density_residual=deriv.density_residual if deriv is not None else 0.0,
        alpha0_min_slope=float(np.min(slope)),
        imag_residue_alpha0=deriv.imag_residue_alpha0 if deriv is not None else 0.0,
    )


def _tension(state, membrane, solver):
    from .membrane import membrane_tension

    try:
        return membrane_tension(state, membrane, solver.filt if solver.toggles.tension else None)
    except ArithmeticError:
        return np.full(state.n, np.nan)


def run(
    initial: InterfaceState,
    membrane: MembraneParams,
    flow: FlowConfig,
    integrator: IntegratorConfig,
    solver: SolverConfig = SolverConfig(),
    *,
    callback: Callable[[InterfaceState, Diagnostics], None] | None = None,
) -> Trajectory:
    """Integrate from ``initial`` to ``integrator.t_end``.

    Diagnostics are recorded at every step in ``history``; full snapshots at
    ``t = 0`` and every ``snapshot_interval``. A runtime failure stops the
    run and is recorded in ``failure``; the partial trajectory is returned.
    """
    t_end = integrator.t_end
    interval = integrator.snapshot_interval or t_end
    dt = integrator.dt or default_dt(initial, membrane, flow, integrator.scheme, integrator.cfl)
    if (
        integrator.enforce_gate
        and integrator.scheme == "rk4_explicit"
        and dt > explicit_gate(initial, membrane.kappa_b, integrator.cfl) * (1 + 1e-12)
    ):
        raise StabilityGateError(
            f"dt = {dt:.3e} exceeds the explicit bending gate "
            f"{explicit_gate(initial, membrane.kappa_b, integrator.cfl):.3e}"
        )

    traj = Trajectory()
    rhs = lambda s: assemble_rhs(s, membrane, flow, solver)  # noqa: E731
    state = initial
    d_first = rhs(state) if t_end > 0 else None
    diag = diagnostics(state, d_first, solver.filt)
    traj.history.append(diag)
    traj.snapshots.append(Snapshot(state.time, state, _tension(state, membrane, solver), diag))
    if callback:
        callback(state, diag)
    if t_end == 0:
        return traj

    # snapshot times are hit exactly; the final time is t_end even when it is
    # not a multiple of the interval
    targets = list(np.arange(1, math.floor(t_end / interval + 1e-9) + 1) * interval)
    if not targets or t_end - targets[-1] > 1e-9 * max(1.0, t_end):
        targets.append(t_end)
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        t_prev = 0.0
        for target in targets:
            span = target - t_prev
            n_steps = max(1, math.ceil(span / dt - 1e-9))
            h_dt = span / n_steps
            traj.dt = h_dt
            for _ in range(n_steps):
                try:
                    state, d0 = step(state, rhs, integrator, h_dt, kappa_b=membrane.kappa_b, flow=flow)
                except (BlowUpError, FrameCollapseError, ArithmeticError, RuntimeError) as exc:
                    traj.failure = f"{type(exc).__name__}: {exc}"
                    traj.last_good_time = state.time
                    log.warning("run stopped at t = %.6g: %s", state.time, exc)
                    return traj
                traj.steps += 1
                # residual of the density solve at the start of this step
                if traj.history:
                    prev = traj.history[-1]
                    traj.history[-1] = Diagnostics(
                        **{**prev.__dict__, "density_residual": d0.density_residual,
                           "imag_residue_alpha0": d0.imag_residue_alpha0}
                    )
                diag = diagnostics(state, None, solver.filt)
                traj.history.append(diag)
                if callback:
                    callback(state, diag)
            state = state.replace(time=target)
            try:
                d_end = rhs(state)
            except (ArithmeticError, RuntimeError, FloatingPointError) as exc:
                traj.failure = f"{type(exc).__name__}: {exc}"
                traj.last_good_time = state.time
                return traj
            diag = diagnostics(state, d_end, solver.filt)
            traj.history[-1] = diag
            traj.snapshots.append(Snapshot(target, state, _tension(state, membrane, solver), diag))
            t_prev = target
    traj.last_good_time = state.time
    return traj
