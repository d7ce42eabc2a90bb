"""Spectral boundary-integral simulation of capsules and drops in 2D Stokes flow.

The interface is tracked in an equal-arclength tangent-angle frame; the
interfacial velocity comes from a complex-variable (Sherman-Lauricella)
integral equation discretized with alternate-point quadrature, and targeted
spectral filtering keeps aliasing errors from destabilizing the scheme.
"""

from .spectral import (
    DEFAULT_FILTER,
    FilterSpec,
    NumericalSingularityError,
    SpectralError,
    SpectralGrid,
    alternate_point_apply,
    alternate_point_sum,
    antiderivative,
    apply_filter,
    dft,
    discrete_mean,
    filtered_derivative,
    get_grid,
    high_mode_max,
    hilbert_commutator,
    hilbert_transform,
    idft,
    prolong,
    restrict,
    spectral_derivative,
    trig_interpolate,
)
from .interface import (
    InterfaceState,
    InvalidShapeError,
    ResamplingError,
    ShapeSpec,
    arclength_nonuniformity,
    circle_state,
    curvature,
    enclosed_area,
    perimeter,
    reconstruct_tau,
    resample_equal_arclength,
)
from .membrane import (
    Forcing,
    MapDegeneracyError,
    MembraneParams,
    assemble_forcing,
    compute_forcing,
    membrane_tension,
    stretch_tension,
)
from .density import (
    DensitySolution,
    FlowConfig,
    GeometryDegeneracyError,
    K_matrix,
    SolverFailureError,
    apply_K,
    solve_density,
)
from .velocity import (
    VelocityField,
    compute_phi_s,
    frame_velocity_zero_mode,
    full_velocity,
    interface_velocity,
    normal_tangential,
    regular_velocity,
)
from .evolution import (
    BlowUpError,
    Diagnostics,
    FilterToggles,
    FrameCollapseError,
    IntegratorConfig,
    SolverConfig,
    StateDerivative,
    Trajectory,
    assemble_rhs,
    default_dt,
    run,
    step,
)

__version__ = "0.1.0"
