"""Bohmian trajectory scattering simulator with stationary-theory oracles."""

__version__ = "0.1.0"

from .beam import (
    BeamConfig,
    EmissionEvent,
    estimate_sigma,
    impact_quadrature,
    lln_run,
    sample_emissions,
    sample_initial_position,
)
from .bohm import (
    CrossingRecord,
    TrajectoryEnsemble,
    advance_trajectories,
    crossing_expectations,
    detect_crossings,
    equivariance_chi2,
    velocity_field,
)
from .detector import DetectorSpec
from .fields import (
    ComplexField,
    FieldError,
    GridSpec,
    PacketSpec,
    build_grid,
    gaussian_packet,
    to_momentum,
    to_position,
)
from .flux import FluxLedger, SphereFluxTracker, continuity_residual, current_density, fast_check
from .harness import (
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    PhysicsError,
    run_experiment,
    scaling_study,
)
from .propagator import (
    EvolutionPlan,
    FreeGaussian,
    PotentialModel,
    apply_wave_operator_minus,
    extract_out_asymptote,
    free_evolve_analytic,
    strang_step,
    suggested_dt,
)
from .runner import co_stepped_run
from .stationary import (
    AmplitudeTable,
    BoundStateError,
    PhaseShiftTable,
    amplitude,
    born_phase_shift,
    born_tmatrix,
    bound_state_scan,
    optical_theorem_residual,
    phase_shifts,
    sigma_diff_prediction,
)
