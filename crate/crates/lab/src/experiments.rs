//! The experiments behind each subcommand. Every `compute_*` function returns
//! typed results; [`run`] turns them into tables on disk.

use std::path::PathBuf;

use rayon::prelude::*;
use serde_json::{json, Value};
use skwave::{
    estimate_rare_event, integrate_wave, minimize_action, recover_control, sample_for_model,
    solve_limit_spde_strided, solve_skeleton, validate_hypotheses, wave_grid_for, ActionResult,
    ControlPath, Field, LimitVariant, ModelSpec, NoiseScale, OptimizerSettings, RareEvent,
    RareEventRow, RareEventStudy, TimeGrid, ValidationOptions, ValidationReport, WaveOptions,
};

use crate::config::{
    ActionMinParams, CorrectorParams, Experiment, ExperimentConfig, InitialVelocity,
    LdpTrendParams, SimulateParams, SkConvergenceParams, ValidateParams,
};
use crate::norms::NormSpec;
use crate::output::{fmt_f64, write_outputs, Table};
use crate::{LabError, Result};

/// Sample count of the quick hypothesis check run before every non-validate experiment.
pub const PREFLIGHT_SAMPLES: usize = 1000;

/// What a finished run reports back to the command line.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub messages: Vec<String>,
    pub warnings: Vec<String>,
}

// ---------------------------------------------------------------- validate

pub fn compute_validate(model: &ModelSpec, params: &ValidateParams, seed: u64) -> Result<ValidationReport> {
    Ok(validate_hypotheses(
        model,
        &ValidationOptions {
            r_check: params.r_check,
            n_samples: params.n_samples,
            seed,
            appendix_experiment: params.appendix_experiment,
        },
    )?)
}

fn validation_table(report: &ValidationReport) -> Table {
    let mut t = Table::new(&["check", "passed", "margin", "witness", "note"]);
    for c in &report.checks {
        t.push(vec![
            c.name.to_string(),
            c.passed.to_string(),
            fmt_f64(c.margin),
            c.witness.clone().unwrap_or_default(),
            c.note.clone(),
        ]);
    }
    t
}

fn report_failure(report: &ValidationReport) -> Option<String> {
    let failed: Vec<String> = report
        .failures()
        .map(|c| match &c.witness {
            Some(w) => format!("{} ({w})", c.name),
            None => c.name.to_string(),
        })
        .collect();
    (!failed.is_empty()).then(|| failed.join("; "))
}

/// Fast check of the model hypotheses; fails with exit status 2 on any violation.
pub fn preflight(model: &ModelSpec, seed: u64, appendix_experiment: bool) -> Result<Vec<String>> {
    let params = ValidateParams {
        n_samples: PREFLIGHT_SAMPLES,
        appendix_experiment,
        ..ValidateParams::default()
    };
    let report = compute_validate(model, &params, seed)?;
    match report_failure(&report) {
        Some(msg) => Err(LabError::HypothesisFailed(msg)),
        None => Ok(report.warnings),
    }
}

// ---------------------------------------------------------------- shared pieces

/// Wave grid fine enough for the smallest `mu`, and its refinement factor over `base`.
fn fine_grid(model: &ModelSpec, mus: &[f64], base: &TimeGrid) -> Result<(TimeGrid, usize)> {
    let mu_min = mus.iter().copied().fold(f64::INFINITY, f64::min);
    let fine = wave_grid_for(model, mu_min, base.horizon(), base.n_steps())?;
    let factor = fine.n_steps() / base.n_steps();
    Ok((fine, factor))
}

fn check_mus(mus: &[f64]) -> Result<()> {
    if mus.is_empty() {
        return Err(LabError::InvalidArgument("the mu grid is empty".into()));
    }
    if let Some(mu) = mus.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
        return Err(LabError::InvalidArgument(format!("mu must be positive, got {mu}")));
    }
    Ok(())
}

fn wave_u_on_base(
    model: &ModelSpec,
    mu: f64,
    u0: &Field,
    fine: &TimeGrid,
    factor: usize,
    xi: &skwave::NoiseIncrements,
) -> Result<Vec<Field>> {
    let v0 = Field::zeros(model.space());
    let opts = WaveOptions {
        save_stride: factor,
        ..WaveOptions::default()
    };
    let traj = integrate_wave(model, mu, NoiseScale::Unit, u0, &v0, fine, Some(xi), None, &opts)?;
    Ok(traj.u_snapshots())
}

fn differences(a: &[Field], b: &[Field]) -> Vec<Field> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

// ---------------------------------------------------------------- sk-convergence

/// Distance between the wave at `mu` and the limit equation, for one noise sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SkValue {
    pub mu: f64,
    pub norm: NormSpec,
    pub value: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkResult {
    pub mus: Vec<f64>,
    pub norms: Vec<NormSpec>,
    pub seeds: Vec<u64>,
    /// Indexed `[seed][mu][norm]`.
    pub values: Vec<Vec<Vec<f64>>>,
}

impl SkResult {
    pub fn rows(&self) -> Vec<SkValue> {
        let mut out = Vec::new();
        for (s, per_seed) in self.seeds.iter().zip(&self.values) {
            for (mu, per_mu) in self.mus.iter().zip(per_seed) {
                for (norm, value) in self.norms.iter().zip(per_mu) {
                    out.push(SkValue {
                        mu: *mu,
                        norm: *norm,
                        value: *value,
                        seed: *s,
                    });
                }
            }
        }
        out
    }

    /// Median over seeds, indexed `[mu][norm]`.
    pub fn medians(&self) -> Vec<Vec<f64>> {
        (0..self.mus.len())
            .map(|m| {
                (0..self.norms.len())
                    .map(|k| {
                        let mut v: Vec<f64> = self.values.iter().map(|s| s[m][k]).collect();
                        median(&mut v)
                    })
                    .collect()
            })
            .collect()
    }

    /// Share of seeds whose values for norm `k` strictly decrease along the mu grid.
    pub fn fraction_monotone(&self, k: usize) -> f64 {
        let good = self
            .values
            .iter()
            .filter(|s| s.windows(2).all(|w| w[1][k] < w[0][k]))
            .count();
        good as f64 / self.values.len() as f64
    }
}

pub fn compute_sk_convergence(
    model: &ModelSpec,
    grid: &TimeGrid,
    params: &SkConvergenceParams,
    seed: u64,
) -> Result<SkResult> {
    let theta = model.reaction.theta();
    if !(theta > 1.0 && theta < 3.0) {
        return Err(LabError::InvalidArgument(format!(
            "the small-mass norm study needs theta in (1, 3), got {theta}"
        )));
    }
    check_mus(&params.mus)?;
    if params.n_seeds == 0 {
        return Err(LabError::InvalidArgument("n_seeds must be positive".into()));
    }
    for norm in &params.norms {
        norm.check(theta)?;
    }
    let u0 = params.u0.build(model.space())?;
    let (fine, factor) = fine_grid(model, &params.mus, grid)?;
    let seeds: Vec<u64> = (0..params.n_seeds as u64).map(|j| seed + j).collect();
    let values = seeds
        .par_iter()
        .map(|&s| {
            let xi = sample_for_model(model, &fine, s, 0);
            let limit = solve_limit_spde_strided(model, &u0, &xi, &fine, LimitVariant::RhoForm, factor)?
                .u_snapshots(model);
            params
                .mus
                .iter()
                .map(|&mu| {
                    let wave = wave_u_on_base(model, mu, &u0, &fine, factor, &xi)?;
                    let diff = differences(&wave, &limit);
                    params.norms.iter().map(|n| n.evaluate(&diff, grid)).collect()
                })
                .collect::<Result<Vec<Vec<f64>>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SkResult {
        mus: params.mus.clone(),
        norms: params.norms.clone(),
        seeds,
        values,
    })
}

fn sk_table(result: &SkResult) -> Table {
    let mut t = Table::new(&["mu", "norm_family", "a_or_delta", "q_or_p", "value", "seed"]);
    for r in result.rows() {
        t.push(vec![
            fmt_f64(r.mu),
            r.norm.family().into(),
            fmt_f64(r.norm.a_or_delta()),
            fmt_f64(r.norm.q_or_p()),
            fmt_f64(r.value),
            r.seed.to_string(),
        ]);
    }
    for (mu, per_mu) in result.mus.iter().zip(result.medians()) {
        for (norm, value) in result.norms.iter().zip(per_mu) {
            t.push(vec![
                fmt_f64(*mu),
                norm.family().into(),
                fmt_f64(norm.a_or_delta()),
                fmt_f64(norm.q_or_p()),
                fmt_f64(value),
                "median".into(),
            ]);
        }
    }
    t
}

// ---------------------------------------------------------------- corrector-test

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorRow {
    pub mu: f64,
    /// Mean over paths of `sup_t |u_mu - u|_H` against the limit with corrector.
    pub e_corr: f64,
    pub se_corr: f64,
    /// The same against the limit without corrector.
    pub e_nocorr: f64,
    pub se_nocorr: f64,
}

impl CorrectorRow {
    pub fn ratio(&self) -> f64 {
        self.e_corr / self.e_nocorr
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorResult {
    pub rows: Vec<CorrectorRow>,
    pub warnings: Vec<String>,
}

fn sup_h(diff: &[Field]) -> f64 {
    diff.iter().map(|f| f.sobolev_norm(0.0)).fold(0.0, f64::max)
}

pub fn compute_corrector_test(
    model: &ModelSpec,
    grid: &TimeGrid,
    params: &CorrectorParams,
    seed: u64,
) -> Result<CorrectorResult> {
    check_mus(&params.mus)?;
    if params.n_paths == 0 {
        return Err(LabError::InvalidArgument("n_paths must be positive".into()));
    }
    let mut warnings = Vec::new();
    if model.friction.is_constant() {
        warnings.push("friction is constant: the corrector vanishes and both limits coincide".into());
    }
    let u0 = params.u0.build(model.space())?;
    let (fine, factor) = fine_grid(model, &params.mus, grid)?;
    // per path: [mu] -> (with corrector, without)
    let per_path = (0..params.n_paths as u64)
        .into_par_iter()
        .map(|j| {
            let xi = sample_for_model(model, &fine, seed, j);
            let with = solve_limit_spde_strided(model, &u0, &xi, &fine, LimitVariant::RhoForm, factor)?
                .u_snapshots(model);
            let without = solve_limit_spde_strided(
                model,
                &u0,
                &xi,
                &fine,
                LimitVariant::RhoFormWithoutCorrector,
                factor,
            )?
            .u_snapshots(model);
            params
                .mus
                .iter()
                .map(|&mu| {
                    let wave = wave_u_on_base(model, mu, &u0, &fine, factor, &xi)?;
                    Ok((sup_h(&differences(&wave, &with)), sup_h(&differences(&wave, &without))))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = params
        .mus
        .iter()
        .enumerate()
        .map(|(m, &mu)| {
            let c: Vec<f64> = per_path.iter().map(|p| p[m].0).collect();
            let n: Vec<f64> = per_path.iter().map(|p| p[m].1).collect();
            let (e_corr, se_corr) = mean_and_se(&c);
            let (e_nocorr, se_nocorr) = mean_and_se(&n);
            CorrectorRow {
                mu,
                e_corr,
                se_corr,
                e_nocorr,
                se_nocorr,
            }
        })
        .collect();
    Ok(CorrectorResult { rows, warnings })
}

fn corrector_table(result: &CorrectorResult) -> Table {
    let mut t = Table::new(&["mu", "E_corr", "E_nocorr", "ratio", "se_corr", "se_nocorr"]);
    for r in &result.rows {
        t.push(vec![
            fmt_f64(r.mu),
            fmt_f64(r.e_corr),
            fmt_f64(r.e_nocorr),
            fmt_f64(r.ratio()),
            fmt_f64(r.se_corr),
            fmt_f64(r.se_nocorr),
        ]);
    }
    t
}

// ---------------------------------------------------------------- action-min

#[derive(Debug, Clone)]
pub struct ActionMinResult {
    pub result: ActionResult,
    /// The minimiser in the configured convention.
    pub reported: ControlPath,
}

pub fn compute_action_min(
    model: &ModelSpec,
    grid: &TimeGrid,
    params: &ActionMinParams,
    seed: u64,
) -> Result<ActionMinResult> {
    let space = model.space();
    let problem = skwave::ActionProblem::new(
        model.clone(),
        params.u0.build(space)?,
        *grid,
        params.target.build(space)?,
        params.penalty,
    )?
    .with_control_stride(params.control_stride)?
    .with_settings(OptimizerSettings {
        max_iterations: params.max_iterations,
        seed,
        ..OptimizerSettings::default()
    });
    let result = minimize_action(&problem, None)?;
    let reported = reported_control(model, &result.control, params.control_convention.into());
    Ok(ActionMinResult { result, reported })
}

fn reported_control(model: &ModelSpec, phi: &ControlPath, convention: skwave::ControlConvention) -> ControlPath {
    skwave::RecoveredControl {
        control: phi.clone(),
        residual: 0.0,
    }
    .reported(model, convention)
}

fn history_table(result: &ActionResult) -> Table {
    let mut t = Table::new(&["iteration", "objective", "action", "endpoint_error", "grad_norm"]);
    for h in &result.history {
        t.push(vec![
            h.iteration.to_string(),
            fmt_f64(h.objective),
            fmt_f64(h.action),
            fmt_f64(h.endpoint_error),
            fmt_f64(h.grad_norm),
        ]);
    }
    t
}

fn control_table(phi: &ControlPath, n_noise: usize) -> Table {
    let mut t = Table::new(&["step", "t", "mode", "value"]);
    let grid = phi.grid();
    for (k, f) in phi.steps().iter().enumerate() {
        for (i, v) in f.coeffs().iter().take(n_noise).enumerate() {
            t.push(vec![k.to_string(), fmt_f64(grid.time(k)), (i + 1).to_string(), fmt_f64(*v)]);
        }
    }
    t
}

// ---------------------------------------------------------------- ldp-trend

#[derive(Debug, Clone)]
pub struct LdpTrendResult {
    pub i_star: f64,
    pub minimizer: ActionResult,
    /// Control recovered from the optimal skeleton path, in the configured convention.
    pub recovered: ControlPath,
    pub recovery_residual: f64,
    pub rows: Vec<RareEventRow>,
}

impl LdpTrendResult {
    /// `-mu log p_hat / I*` per mu.
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.minus_mu_log_p / self.i_star).collect()
    }
}

pub fn compute_ldp_trend(
    model: &ModelSpec,
    horizon: f64,
    params: &LdpTrendParams,
    seed: u64,
) -> Result<LdpTrendResult> {
    check_mus(&params.mus)?;
    if !(params.radius > 0.0) {
        return Err(LabError::InvalidArgument(format!(
            "tube radius must be positive, got {}",
            params.radius
        )));
    }
    let space = model.space();
    let grid = TimeGrid::new(horizon, params.base_steps)?;
    let u0 = params.u0.build(space)?;
    let problem = skwave::ActionProblem::new(
        model.clone(),
        u0.clone(),
        grid,
        params.target.build(space)?,
        params.penalty,
    )?
    .with_settings(OptimizerSettings {
        max_iterations: params.max_iterations,
        seed,
        ..OptimizerSettings::default()
    });
    let minimizer = minimize_action(&problem, None)?;
    let phi = &minimizer.control;
    let skeleton = solve_skeleton(model, &u0, phi, &grid, space.n_modes())?;
    let reference = skeleton.u_snapshots(model);
    let recovered = recover_control(&skeleton, model)?;
    let v0 = match params.initial_velocity {
        InitialVelocity::Zero => Field::zeros(space),
        InitialVelocity::Skeleton => (1.0 / grid.dt()) * &(&reference[1] - &reference[0]),
    };
    let study = RareEventStudy {
        u0,
        v0,
        horizon,
        base_steps: params.base_steps,
        event: RareEvent::Tube {
            reference,
            reference_grid: grid,
            radius: params.radius,
            norm: params.tube_norm.build(model.reaction.theta())?,
        },
        n_samples: params.n_samples,
        tilt: Some(phi.clone()),
        seed,
        wave_options: WaveOptions::default(),
    };
    let rows = estimate_rare_event(model, &params.mus, &study)?;
    Ok(LdpTrendResult {
        i_star: minimizer.i_star,
        recovered: recovered.reported(model, params.control_convention.into()),
        recovery_residual: recovered.residual,
        minimizer,
        rows,
    })
}

fn ldp_table(result: &LdpTrendResult) -> Table {
    let mut t = Table::new(&["mu", "p_hat", "stderr", "minus_mu_log_p", "I_star", "hits", "n_samples"]);
    for r in &result.rows {
        t.push(vec![
            fmt_f64(r.mu),
            fmt_f64(r.p_hat),
            fmt_f64(r.std_error),
            fmt_f64(r.minus_mu_log_p),
            fmt_f64(result.i_star),
            r.hits.to_string(),
            r.n_samples.to_string(),
        ]);
    }
    t
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone)]
pub struct SimulateResult {
    pub table: Table,
    pub truncation_activated: bool,
    pub final_h_norm: f64,
}

pub fn compute_simulate(
    model: &ModelSpec,
    grid: &TimeGrid,
    params: &SimulateParams,
    seed: u64,
) -> Result<SimulateResult> {
    check_mus(&[params.mu])?;
    let space = model.space();
    let u0 = params.u0.build(space)?;
    let v0 = Field::zeros(space);
    let fine = wave_grid_for(model, params.mu, grid.horizon(), grid.n_steps())?;
    let factor = fine.n_steps() / grid.n_steps();
    let xi = params
        .noise
        .then(|| sample_for_model(model, &fine, seed, params.stream));
    let opts = WaveOptions {
        save_stride: factor,
        truncation: params.truncation.build()?,
    };
    let traj = integrate_wave(
        model,
        params.mu,
        params.noise_scale.into(),
        &u0,
        &v0,
        &fine,
        xi.as_ref(),
        None,
        &opts,
    )?;
    let energy = skwave::energy_diagnostics(&traj, model);
    let mut table = Table::new(&["t", "u_h", "v_h", "h1_sq", "lp_pow", "kinetic", "l_mu", "energy"]);
    for (k, s) in traj.states().iter().enumerate() {
        table.push(vec![
            fmt_f64(s.t),
            fmt_f64(s.u.sobolev_norm(0.0)),
            fmt_f64(s.v.sobolev_norm(0.0)),
            fmt_f64(energy.h1_sq[k]),
            fmt_f64(energy.lp_pow[k]),
            fmt_f64(energy.kinetic[k]),
            fmt_f64(energy.l_mu[k]),
            fmt_f64(energy.energy[k]),
        ]);
    }
    Ok(SimulateResult {
        table,
        truncation_activated: traj.truncation_activated(),
        final_h_norm: traj.last().u.sobolev_norm(0.0),
    })
}

// ---------------------------------------------------------------- dispatch

/// Runs the configured experiment and writes its outputs under `config.out`.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    let experiment = config
        .experiment
        .as_ref()
        .ok_or_else(|| LabError::Config("missing [experiment] section".into()))?;
    let model = config.model.build()?;
    let grid = config.grid.build()?;
    let seed = config.seed;
    let out = &config.out;
    let mut report = RunReport::default();
    let stem = experiment.kind().replace('_', "-");

    if !matches!(experiment, Experiment::Validate(_)) {
        let appendix = matches!(experiment, Experiment::SkConvergence(_) | Experiment::CorrectorTest(_));
        report.warnings.extend(preflight(&model, seed, appendix)?);
    }

    match experiment {
        Experiment::Validate(p) => {
            let (table, failure, hard) = match compute_validate(&model, p, seed) {
                Ok(rep) => {
                    report.warnings.extend(rep.warnings.iter().cloned());
                    (validation_table(&rep), report_failure(&rep), None)
                }
                Err(LabError::Core(e @ skwave::Error::ValidationFailed { .. })) => {
                    let skwave::Error::ValidationFailed { check, witness } = &e else { unreachable!() };
                    let mut t = Table::new(&["check", "passed", "margin", "witness", "note"]);
                    t.push(vec![check.clone(), "false".into(), "NaN".into(), witness.clone(), "hard failure".into()]);
                    (t, Some(format!("{check} ({witness})")), Some(e))
                }
                Err(e) => return Err(e),
            };
            let summary = json!({ "passed": failure.is_none(), "failure": failure });
            report.files = write_outputs(out, &stem, config, &table, &[], summary)?;
            if let Some(e) = hard {
                return Err(e.into());
            }
            match failure {
                Some(msg) => return Err(LabError::HypothesisFailed(msg)),
                None => report.messages.push("all hypothesis checks passed".into()),
            }
        }
        Experiment::SkConvergence(p) => {
            let result = compute_sk_convergence(&model, &grid, p, seed)?;
            let monotone: Vec<Value> = result
                .norms
                .iter()
                .enumerate()
                .map(|(k, n)| json!({ "norm": n.family(), "fraction_monotone": result.fraction_monotone(k) }))
                .collect();
            for (mu, per_mu) in result.mus.iter().zip(result.medians()) {
                let cells: Vec<String> = result
                    .norms
                    .iter()
                    .zip(per_mu)
                    .map(|(n, v)| format!("{}={v:.4e}", n.family()))
                    .collect();
                report.messages.push(format!("mu={mu}: median {}", cells.join(" ")));
            }
            report.files = write_outputs(out, &stem, config, &sk_table(&result), &[], json!({ "monotone": monotone }))?;
        }
        Experiment::CorrectorTest(p) => {
            let result = compute_corrector_test(&model, &grid, p, seed)?;
            report.warnings.extend(result.warnings.iter().cloned());
            for r in &result.rows {
                report.messages.push(format!(
                    "mu={}: E_corr={:.4e} E_nocorr={:.4e} ratio={:.3}",
                    r.mu,
                    r.e_corr,
                    r.e_nocorr,
                    r.ratio()
                ));
            }
            let summary = json!({ "warnings": result.warnings });
            report.files = write_outputs(out, &stem, config, &corrector_table(&result), &[], summary)?;
        }
        Experiment::ActionMin(p) => {
            let result = compute_action_min(&model, &grid, p, seed)?;
            let r = &result.result;
            report.messages.push(format!(
                "I* = {:.6e}, endpoint error {:.3e}, converged {}",
                r.i_star, r.value.endpoint_error, r.converged
            ));
            let worst = r.gradient_check.iter().map(|g| g.relative_error).fold(0.0, f64::max);
            let summary = json!({
                "i_star": r.i_star,
                "objective": r.value.objective,
                "endpoint_error": r.value.endpoint_error,
                "converged": r.converged,
                "gradient_check_max_relative_error": worst,
            });
            let control = control_table(&result.reported, model.n_noise());
            report.files = write_outputs(out, &stem, config, &history_table(r), &[("control", &control)], summary)?;
        }
        Experiment::LdpTrend(p) => {
            let result = compute_ldp_trend(&model, grid.horizon(), p, seed)?;
            for (r, ratio) in result.rows.iter().zip(result.ratios()) {
                if r.recommend_tilt {
                    report.warnings.push(format!("mu={}: no sample hit the event", r.mu));
                }
                report.messages.push(format!(
                    "mu={}: p_hat={:.4e} (se {:.2e}) -mu log p={:.4} I*={:.4} ratio={ratio:.3}",
                    r.mu, r.p_hat, r.std_error, r.minus_mu_log_p, result.i_star
                ));
            }
            let summary = json!({
                "i_star": result.i_star,
                "converged": result.minimizer.converged,
                "recovery_residual": result.recovery_residual,
                "ratios": result.ratios(),
            });
            let control = control_table(&result.recovered, model.n_noise());
            report.files = write_outputs(out, &stem, config, &ldp_table(&result), &[("control", &control)], summary)?;
        }
        Experiment::Simulate(p) => {
            let result = compute_simulate(&model, &grid, p, seed)?;
            if result.truncation_activated {
                report.warnings.push("the reaction truncation was active during the run".into());
            }
            report.messages.push(format!("final |u|_H = {:.6e}", result.final_h_norm));
            let summary = json!({
                "truncation_activated": result.truncation_activated,
                "final_h_norm": result.final_h_norm,
            });
            report.files = write_outputs(out, &stem, config, &result.table, &[], summary)?;
        }
    }
    Ok(report)
}
