import math

import numpy as np
import pytest

from capsule_bim import (
    FlowConfig,
    IntegratorConfig,
    MembraneParams,
    ShapeSpec,
    SolverConfig,
    StateDerivative,
    assemble_rhs,
    circle_state,
    default_dt,
    enclosed_area,
    resample_equal_arclength,
    run,
    step,
)
from capsule_bim.evolution import StabilityGateError, explicit_gate
from conftest import smooth_state


def test_circle_at_rest_stays_put():
    st = circle_state(32, radius=1.3, center=0.2 - 0.1j)
    flow = FlowConfig(lam=0.5)
    mem = MembraneParams(mode="constant", tension=1.0, sigma0=1.3)
    traj = run(st, mem, flow, IntegratorConfig(dt=0.01, t_end=1.0))
    assert traj.completed and traj.steps == 100
    fin = traj.final
    assert np.max(np.abs(fin.theta_periodic - st.theta_periodic)) < 1e-12
    assert abs(fin.sigma - 1.3) < 1e-12 and abs(fin.tau_c - st.tau_c) < 1e-12


def test_rk4_is_fourth_order():
    st = circle_state(16).replace(theta_periodic=np.full(16, 0.3), sigma=1.0)

    def rhs(s):
        return StateDerivative(
            dtheta=-s.theta_periodic, dsigma=-0.5 * s.sigma, dalpha0=np.zeros(16), dtau_c=1j * s.tau_c
        )

    errors = []
    for n_steps in (5, 10, 20):
        s, dt = st.replace(tau_c=1.0 + 0j), 1.0 / n_steps
        for _ in range(n_steps):
            s, _ = step(s, rhs, IntegratorConfig(), dt)
        errors.append(abs(s.sigma - math.exp(-0.5)) + abs(s.theta_periodic[0] - 0.3 * math.exp(-1)))
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(orders > 3.8)


def _bending_setup():
    st = resample_equal_arclength(ShapeSpec(kind="ellipse", a=1.2, b=1 / 1.2), 64)
    mem = MembraneParams(kappa_b=1.0, mode="constant", tension=0.0, sigma0=st.sigma)
    return st, mem, FlowConfig(lam=1.0)


def test_bending_relaxes_ellipse_with_imex():
    st, mem, flow = _bending_setup()
    dt = 0.01
    assert dt > 35 * explicit_gate(st, mem.kappa_b)
    traj = run(st, mem, flow, IntegratorConfig(scheme="imex_bending", dt=dt, t_end=1.0, enforce_gate=False))
    assert traj.completed
    per = [d.perimeter for d in traj.history]
    area = [d.area for d in traj.history]
    assert np.all(np.diff(per) < 0)
    # area is conserved up to the time discretization error
    assert max(abs(a - area[0]) for a in area) < 1e-6


def test_explicit_scheme_fails_beyond_gate():
    st, mem, flow = _bending_setup()
    dt = 0.01
    with pytest.raises(StabilityGateError):
        run(st, mem, flow, IntegratorConfig(dt=dt, t_end=1.0))
    traj = run(st, mem, flow, IntegratorConfig(dt=dt, t_end=1.0, enforce_gate=False))
    assert not traj.completed
    assert "BlowUpError" in traj.failure or "FrameCollapse" in traj.failure


def test_default_dt_respects_gate():
    st, mem, flow = _bending_setup()
    assert default_dt(st, mem, flow, "rk4_explicit", 0.25) <= explicit_gate(st, mem.kappa_b) * (1 + 1e-12)
    assert default_dt(st, mem, flow, "imex_bending", 0.25) > explicit_gate(st, mem.kappa_b)


def test_winding_and_area_conserved_in_strain():
    st = smooth_state(64, seed=1)
    mem = MembraneParams(kappa_b=0.05, s0=1.0, sigma0=st.sigma)
    flow = FlowConfig(Q=1.0, lam=1.0)
    traj = run(st, mem, flow, IntegratorConfig(scheme="imex_bending", dt=2e-3, t_end=0.1, snapshot_interval=0.05))
    assert traj.completed and len(traj.snapshots) == 3
    assert [s.time for s in traj.snapshots] == [0.0, 0.05, 0.1]
    fin = traj.final
    assert fin.winding == st.winding
    assert abs(enclosed_area(fin) - enclosed_area(st)) < 1e-8
    assert abs(np.mean(fin.dtheta) - fin.winding) < 1e-14
    assert all(d.density_residual < 1e-12 for d in traj.history[:-1])
    assert all(d.alpha0_min_slope > 0 for d in traj.history)


def test_rhs_of_tangential_reparametrization_keeps_equal_arclength():
    st = smooth_state(64, seed=3)
    flow = FlowConfig(Q=0.5, lam=0.3)
    d = assemble_rhs(st, MembraneParams(kappa_b=0.1, s0=1.0, sigma0=st.sigma), flow)
    # theta stays periodic: its zero mode changes only by a rigid rotation,
    # and the backward map's transport is real
    assert np.all(np.isfinite(d.dtheta)) and np.isfinite(d.dsigma)
    assert d.imag_residue_alpha0 < 1e-10


def test_frame_collapse_is_reported():
    st = circle_state(16)

    def rhs(s):
        return StateDerivative(np.zeros(16), -10.0, np.zeros(16), 0j)

    with pytest.raises(ArithmeticError):
        step(st, rhs, IntegratorConfig(), 1.0)


def test_solver_config_is_used():
    st = smooth_state(32, seed=2)
    flow = FlowConfig(Q=0.5, lam=0.3)
    mem = MembraneParams(kappa_b=0.1, s0=1.0, sigma0=st.sigma)
    a = assemble_rhs(st, mem, flow, SolverConfig(method="direct"))
    b = assemble_rhs(st, mem, flow, SolverConfig(method="fixed_point"))
    assert np.max(np.abs(a.dtheta - b.dtheta)) < 1e-11
