//! Command-line front end.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{
    CorrectorParams, Experiment, ExperimentConfig, SkConvergenceParams, ValidateParams,
};
use crate::experiments::{run, RunReport};
use crate::{LabError, Result};

#[derive(Debug, Parser)]
#[command(name = "skwave-lab", version, about = "Small-mass and large-deviation experiments for damped stochastic waves")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Experiment configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Overrides the seed of the configuration.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Overrides the output directory of the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Worker threads; all available cores when absent.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check the model hypotheses.
    Validate,
    /// Distance between the wave and the limit equation in several space-time norms.
    SkConvergence,
    /// Limit with and without the corrector drift against the wave.
    CorrectorTest,
    /// Importance-sampled tube probabilities against the minimal action.
    LdpTrend,
    /// Minimal action to reach a target.
    ActionMin,
    /// A single wave trajectory with energy diagnostics.
    Simulate,
}

impl Command {
    pub fn kind(self) -> &'static str {
        match self {
            Self::Validate => "validate",
            Self::SkConvergence => "sk_convergence",
            Self::CorrectorTest => "corrector_test",
            Self::LdpTrend => "ldp_trend",
            Self::ActionMin => "action_min",
            Self::Simulate => "simulate",
        }
    }

    fn default_experiment(self) -> Result<Experiment> {
        match self {
            Self::Validate => Ok(Experiment::Validate(ValidateParams::default())),
            Self::SkConvergence => Ok(Experiment::SkConvergence(SkConvergenceParams::default())),
            Self::CorrectorTest => Ok(Experiment::CorrectorTest(CorrectorParams::default())),
            Self::LdpTrend | Self::ActionMin => Err(LabError::Config(format!(
                "{} needs an [experiment] section declaring control_convention = \"pre_q\" or \"post_q\"",
                self.kind()
            ))),
            Self::Simulate => Err(LabError::Config(
                "simulate needs an [experiment] section declaring noise_scale = \"unit\" or \"sqrt_mu\"".into(),
            )),
        }
    }
}

/// Configuration for `cli` after file loading and flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    match &config.experiment {
        None => config.experiment = Some(cli.command.default_experiment()?),
        Some(e) if e.kind() != cli.command.kind() => {
            return Err(LabError::Config(format!(
                "the configuration describes a `{}` experiment, not `{}`",
                e.kind(),
                cli.command.kind()
            )))
        }
        Some(_) => {}
    }
    Ok(config)
}

fn execute(cli: &Cli) -> Result<RunReport> {
    let config = resolve_config(cli)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(LabError::InvalidArgument("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| LabError::InvalidArgument(format!("cannot start the thread pool: {e}")))?;
    pool.install(|| run(&config))
}

/// Parses `args`, runs the experiment and returns the process exit status.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    match execute(&cli) {
        Ok(report) => {
            for w in &report.warnings {
                let _ = writeln!(stderr, "warning: {w}");
            }
            for m in &report.messages {
                let _ = writeln!(stdout, "{m}");
            }
            for f in &report.files {
                let _ = writeln!(stdout, "wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
