//! Numerical toolkit for damped stochastic wave equations with state-dependent
//! friction: spectral Galerkin discretisation, small-mass limits, controlled
//! skeleton equations and large-deviation rate functions.

pub mod error;
pub mod ldp;
pub mod model;
pub mod noise;
pub mod parabolic;
pub mod spectral;
pub mod wave;

pub use error::{Error, Result};
pub use model::{
    validate_hypotheses, CheckOutcome, DiffusionSpec, FrictionSpec, ModelSpec, Multiplier,
    NoiseSpectrum, ReactionSpec, ValidationOptions, ValidationReport,
};
pub use spectral::{
    bochner_from_pointwise, bochner_norm, w_lambda_r_seminorm, BochnerSpec, Field, SpectralSpace,
    TimeGrid,
};
pub use noise::{
    girsanov_log_weight, sample_for_model, sample_increments, ControlPath, ControlSource,
    FeedbackControl, NoiseIncrements,
};
pub use parabolic::{
    residual_check, residual_check_with, solve_limit_spde, solve_limit_spde_strided, solve_skeleton,
    LimitVariant, RhoTrajectory,
};
pub use wave::{
    energy_diagnostics, integrate_wave, max_stable_dt, rho_transform, EnergyReport, NoiseScale,
    Truncation, WaveOptions, WaveState, WaveTrajectory,
};
pub use ldp::{
    action_of_control, estimate_rare_event, gradient_check, minimize_action, objective,
    objective_and_gradient, recover_control, recover_control_from_u, wave_grid_for, ActionProblem,
    ActionResult, ControlConvention, GradientCheck, IterationRecord, ObjectiveValue,
    OptimizerSettings, RareEvent, RareEventRow, RareEventStudy, RecoveredControl, TubeNorm,
};

/// Version of this library.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
