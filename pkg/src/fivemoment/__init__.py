"""Realizability-preserving 1D finite-volume solver for five-moment
kinetic closure systems (two-node Gaussian-EQMOM and three-point HyQMOM).
"""

from . import errors
from .closures import (
    DEFAULT_WAVE_CONST,
    EqmomClosure,
    EqmomParams,
    HyqmomClosure,
    HyqmomParams,
    WaveSpeedPair,
    eqmom_forward,
    eqmom_invert,
    eqmom_m5,
    flux_vector,
    get_closure,
    hyqmom_forward,
    hyqmom_invert,
    hyqmom_m5,
    wave_speeds,
)
from .harness import (
    PRESET_NAMES,
    ErrorReport,
    Preset,
    build_preset,
    convergence_study,
    error_norms,
    init_state,
    preset_boundary,
    restrict_reference,
    source_mode_for,
)
from .moments import (
    DEFAULT_REL_MARGIN,
    RealizabilityMargins,
    hankel,
    is_strictly_realizable,
    leading_minors,
    margins,
    maxwellian_moments,
    realizable_within,
    state_scale,
)
from .scheme import (
    AUDIT_TOL,
    BoundaryConditions,
    BoundarySpec,
    FaceStates,
    GridState,
    RunStats,
    SourceMode,
    apply_bc,
    bgk_source,
    cfl_dt,
    euler_step_at_cfl,
    evolve,
    forward_euler_step,
    hll_flux,
    mu_star,
    realizability_limit,
    reconstruct_faces,
    ssp_rk2_step,
    van_albada_slope,
)

__version__ = "0.1.0"
