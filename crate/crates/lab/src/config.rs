//! Experiment configuration files (TOML). Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use skwave::{
    ControlConvention, DiffusionSpec, Field, FrictionSpec, ModelSpec, Multiplier, NoiseScale,
    NoiseSpectrum, ReactionSpec, SpectralSpace, TimeGrid, Truncation, TubeNorm,
};

use crate::norms::NormSpec;
use crate::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelSection::default(),
            grid: GridSection::default(),
            experiment: None,
            seed: 0,
            out: default_out(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, LabError> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// SHA-256 of the canonical serialisation with `seed` and `out` cleared.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.seed = 0;
        canonical.out = PathBuf::new();
        let text = toml::to_string(&canonical).expect("config serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "one")]
    pub length: f64,
    #[serde(default = "default_modes")]
    pub n_modes: usize,
    /// Interior quadrature nodes; `4 n_modes` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_nodes: Option<usize>,
    #[serde(default = "default_friction")]
    pub friction: FrictionSpec,
    #[serde(default = "default_reaction")]
    pub reaction: ReactionSpec,
    #[serde(default = "default_diffusion")]
    pub diffusion: DiffusionSpec,
}

fn one() -> f64 {
    1.0
}

fn default_modes() -> usize {
    64
}

fn default_friction() -> FrictionSpec {
    FrictionSpec::Sinusoidal {
        base: 2.0,
        amplitude: 1.0,
    }
}

fn default_reaction() -> ReactionSpec {
    ReactionSpec::KleinGordon { a: 1.0, theta: 2.0 }
}

fn default_diffusion() -> DiffusionSpec {
    DiffusionSpec {
        multiplier: Multiplier::Affine {
            offset: 1.0,
            slope: 0.2,
            floor: Some(0.2),
        },
        spectrum: NoiseSpectrum::Power {
            lambda0: 1.0,
            decay: 1.5,
        },
        n_noise: 16,
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            length: 1.0,
            n_modes: default_modes(),
            quad_nodes: None,
            friction: default_friction(),
            reaction: default_reaction(),
            diffusion: default_diffusion(),
        }
    }
}

impl ModelSection {
    pub fn space(&self) -> Result<Arc<SpectralSpace>, LabError> {
        let space = match self.quad_nodes {
            Some(q) => SpectralSpace::new(self.length, self.n_modes, q),
            None => SpectralSpace::with_default_quadrature(self.length, self.n_modes),
        }?;
        Ok(space)
    }

    pub fn build(&self) -> Result<ModelSpec, LabError> {
        let space = self.space()?;
        Ok(ModelSpec::new(
            &space,
            self.friction.clone(),
            self.reaction.clone(),
            self.diffusion.clone(),
        )?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
}

fn default_horizon() -> f64 {
    0.5
}

fn default_steps() -> usize {
    1000
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            horizon: default_horizon(),
            n_steps: default_steps(),
        }
    }
}

impl GridSection {
    pub fn build(&self) -> Result<TimeGrid, LabError> {
        Ok(TimeGrid::new(self.horizon, self.n_steps)?)
    }
}

/// One term of a [`FieldSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub mode: usize,
    pub amplitude: f64,
}

/// A field given as `sum amplitude sin(k pi x / L)` plus `sum amplitude e_k`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sine: Vec<Term>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub basis: Vec<Term>,
}

impl FieldSpec {
    pub fn sine_mode(mode: usize, amplitude: f64) -> Self {
        Self {
            sine: vec![Term { mode, amplitude }],
            basis: Vec::new(),
        }
    }

    pub fn basis_mode(mode: usize, amplitude: f64) -> Self {
        Self {
            sine: Vec::new(),
            basis: vec![Term { mode, amplitude }],
        }
    }

    pub fn build(&self, space: &Arc<SpectralSpace>) -> Result<Field, LabError> {
        let n = space.n_modes();
        let scale = (space.length() / 2.0).sqrt();
        let mut coeffs = vec![0.0; n];
        for (terms, factor) in [(&self.sine, scale), (&self.basis, 1.0)] {
            for t in terms {
                if t.mode == 0 || t.mode > n {
                    return Err(LabError::Config(format!(
                        "mode {} outside 1..={n}",
                        t.mode
                    )));
                }
                coeffs[t.mode - 1] += factor * t.amplitude;
            }
        }
        Ok(Field::from_coeffs(space, coeffs)?)
    }
}

fn unit_sine() -> FieldSpec {
    FieldSpec::sine_mode(1, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Validate(ValidateParams),
    SkConvergence(SkConvergenceParams),
    CorrectorTest(CorrectorParams),
    LdpTrend(LdpTrendParams),
    ActionMin(ActionMinParams),
    Simulate(SimulateParams),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Validate(_) => "validate",
            Self::SkConvergence(_) => "sk_convergence",
            Self::CorrectorTest(_) => "corrector_test",
            Self::LdpTrend(_) => "ldp_trend",
            Self::ActionMin(_) => "action_min",
            Self::Simulate(_) => "simulate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateParams {
    #[serde(default = "ten")]
    pub r_check: f64,
    #[serde(default = "ten_thousand")]
    pub n_samples: usize,
    #[serde(default)]
    pub appendix_experiment: bool,
}

fn ten() -> f64 {
    10.0
}

fn ten_thousand() -> usize {
    10_000
}

impl Default for ValidateParams {
    fn default() -> Self {
        Self {
            r_check: 10.0,
            n_samples: 10_000,
            appendix_experiment: false,
        }
    }
}

fn small_mass_grid() -> Vec<f64> {
    vec![0.1, 0.03, 0.01]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkConvergenceParams {
    #[serde(default = "small_mass_grid")]
    pub mus: Vec<f64>,
    #[serde(default = "one_usize")]
    pub n_seeds: usize,
    #[serde(default = "default_norms")]
    pub norms: Vec<NormSpec>,
    #[serde(default = "unit_sine")]
    pub u0: FieldSpec,
}

fn one_usize() -> usize {
    1
}

fn default_norms() -> Vec<NormSpec> {
    vec![
        NormSpec::X1 { a: 0.5, q: 2.0 },
        NormSpec::X2 { delta: 0.1, p: 2.0 },
        NormSpec::CH,
    ]
}

impl Default for SkConvergenceParams {
    fn default() -> Self {
        Self {
            mus: small_mass_grid(),
            n_seeds: 1,
            norms: default_norms(),
            u0: unit_sine(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectorParams {
    #[serde(default = "small_mass_grid")]
    pub mus: Vec<f64>,
    #[serde(default = "two_hundred")]
    pub n_paths: usize,
    #[serde(default = "unit_sine")]
    pub u0: FieldSpec,
}

fn two_hundred() -> usize {
    200
}

impl Default for CorrectorParams {
    fn default() -> Self {
        Self {
            mus: small_mass_grid(),
            n_paths: 200,
            u0: unit_sine(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConventionSpec {
    PreQ,
    PostQ,
}

impl From<ConventionSpec> for ControlConvention {
    fn from(c: ConventionSpec) -> Self {
        match c {
            ConventionSpec::PreQ => Self::PreQ,
            ConventionSpec::PostQ => Self::PostQ,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TubeNormSpec {
    H,
    Lp { p: f64 },
}

impl TubeNormSpec {
    pub fn build(self, theta: f64) -> Result<TubeNorm, LabError> {
        match self {
            Self::H => Ok(TubeNorm::H),
            Self::Lp { p } if p >= 1.0 && p.is_finite() => {
                if p > theta + 1.0 {
                    Err(LabError::Config(format!(
                        "tube exponent p = {p} exceeds theta + 1 = {}",
                        theta + 1.0
                    )))
                } else {
                    Ok(TubeNorm::Lp(p))
                }
            }
            Self::Lp { p } => Err(LabError::Config(format!("tube exponent must be >= 1, got {p}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialVelocity {
    Zero,
    /// The first-step velocity of the optimal skeleton path.
    Skeleton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdpTrendParams {
    pub control_convention: ConventionSpec,
    #[serde(default = "ldp_mus")]
    pub mus: Vec<f64>,
    #[serde(default = "two_thousand")]
    pub n_samples: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "tube_h")]
    pub tube_norm: TubeNormSpec,
    #[serde(default)]
    pub u0: FieldSpec,
    #[serde(default = "default_target")]
    pub target: FieldSpec,
    #[serde(default = "default_penalty")]
    pub penalty: f64,
    #[serde(default = "hundred")]
    pub base_steps: usize,
    #[serde(default = "skeleton_velocity")]
    pub initial_velocity: InitialVelocity,
    #[serde(default = "five_hundred")]
    pub max_iterations: usize,
}

fn ldp_mus() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}

fn two_thousand() -> usize {
    2000
}

fn default_radius() -> f64 {
    0.05
}

fn tube_h() -> TubeNormSpec {
    TubeNormSpec::H
}

fn default_target() -> FieldSpec {
    FieldSpec::basis_mode(1, 0.5)
}

fn default_penalty() -> f64 {
    1e-4
}

fn hundred() -> usize {
    100
}

fn skeleton_velocity() -> InitialVelocity {
    InitialVelocity::Skeleton
}

fn five_hundred() -> usize {
    500
}

impl LdpTrendParams {
    pub fn new(control_convention: ConventionSpec) -> Self {
        Self {
            control_convention,
            mus: ldp_mus(),
            n_samples: two_thousand(),
            radius: default_radius(),
            tube_norm: TubeNormSpec::H,
            u0: FieldSpec::default(),
            target: default_target(),
            penalty: default_penalty(),
            base_steps: 100,
            initial_velocity: InitialVelocity::Skeleton,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionMinParams {
    pub control_convention: ConventionSpec,
    #[serde(default)]
    pub u0: FieldSpec,
    #[serde(default = "default_target")]
    pub target: FieldSpec,
    #[serde(default = "default_penalty")]
    pub penalty: f64,
    #[serde(default = "one_usize")]
    pub control_stride: usize,
    #[serde(default = "five_hundred")]
    pub max_iterations: usize,
}

impl ActionMinParams {
    pub fn new(control_convention: ConventionSpec) -> Self {
        Self {
            control_convention,
            u0: FieldSpec::default(),
            target: default_target(),
            penalty: default_penalty(),
            control_stride: 1,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScaleSpec {
    Unit,
    SqrtMu,
}

impl From<NoiseScaleSpec> for NoiseScale {
    fn from(s: NoiseScaleSpec) -> Self {
        match s {
            NoiseScaleSpec::Unit => Self::Unit,
            NoiseScaleSpec::SqrtMu => Self::SqrtMu,
        }
    }
}

/// `"auto"`, `"off"`, or an explicit level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TruncationSpec {
    Level(f64),
    Named(String),
}

impl Default for TruncationSpec {
    fn default() -> Self {
        Self::Named("auto".into())
    }
}

impl TruncationSpec {
    pub fn build(&self) -> Result<Truncation, LabError> {
        match self {
            Self::Level(n) if *n > 0.0 => Ok(Truncation::Level(*n)),
            Self::Level(n) => Err(LabError::Config(format!("truncation level must be positive, got {n}"))),
            Self::Named(s) if s == "auto" => Ok(Truncation::Auto),
            Self::Named(s) if s == "off" => Ok(Truncation::Off),
            Self::Named(s) => Err(LabError::Config(format!(
                "truncation must be \"auto\", \"off\" or a number, got \"{s}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub noise_scale: NoiseScaleSpec,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "yes")]
    pub noise: bool,
    #[serde(default)]
    pub stream: u64,
    #[serde(default = "unit_sine")]
    pub u0: FieldSpec,
    #[serde(default)]
    pub truncation: TruncationSpec,
}

fn default_mu() -> f64 {
    0.1
}

fn yes() -> bool {
    true
}

impl SimulateParams {
    pub fn new(noise_scale: NoiseScaleSpec) -> Self {
        Self {
            noise_scale,
            mu: default_mu(),
            noise: true,
            stream: 0,
            u0: unit_sine(),
            truncation: TruncationSpec::default(),
        }
    }
}
