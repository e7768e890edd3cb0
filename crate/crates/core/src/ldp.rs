//! Large-deviation rate functional: action of a control, control recovery for
//! invertible diffusion, minimal action by the discrete adjoint, and tilted
//! rare-event estimation.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::ModelSpec;
use crate::noise::{girsanov_log_weight, sample_for_model, ControlPath};
use crate::parabolic::{check_grid, check_space, rho_of_u, u_of_rho, Forcing, RhoStepper, RhoTrajectory};
use crate::spectral::{Field, TimeGrid};
use crate::wave::{integrate_wave, max_stable_dt, NoiseScale, WaveOptions};

/// `1/2 sum_k dt |phi_k|_H^2`.
pub fn action_of_control(phi: &ControlPath) -> f64 {
    0.5 * phi.norm().powi(2)
}

/// Whether recovered controls are reported as `phi` or as `Q phi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlConvention {
    PreQ,
    PostQ,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredControl {
    /// The control `phi` (before `Q`).
    pub control: ControlPath,
    /// Largest relative residual of the least-squares inversion over the steps.
    pub residual: f64,
}

impl RecoveredControl {
    /// The control in the requested convention.
    pub fn reported(&self, model: &ModelSpec, convention: ControlConvention) -> ControlPath {
        match convention {
            ControlConvention::PreQ => self.control.clone(),
            ControlConvention::PostQ => {
                let lambdas = model.lambdas();
                let steps = self
                    .control
                    .steps()
                    .iter()
                    .map(|f| {
                        let c = f
                            .coeffs()
                            .iter()
                            .enumerate()
                            .map(|(i, v)| v * lambdas.get(i).copied().unwrap_or(0.0))
                            .collect();
                        Field::from_coeffs(f.space(), c).expect("same space")
                    })
                    .collect();
                ControlPath::from_fields(*self.control.grid(), steps).expect("same grid")
            }
        }
    }
}

/// Relative residual above which the path is declared out of reach of the noise.
const RECOVERY_TOLERANCE: f64 = 1e-6;

/// Inverts the skeleton stepper: finds `phi_k` with
/// `stepper(rho_k, phi_k) = rho_{k+1}` by least squares over the noise modes.
pub fn recover_control(path: &RhoTrajectory, model: &ModelSpec) -> Result<RecoveredControl> {
    if !model.diffusion.is_invertible() {
        return Err(Error::UnsupportedModel(
            "control recovery needs s >= s_min > 0 and lambda_i > 0 on the retained modes".into(),
        ));
    }
    if path.stride() != 1 {
        return invalid("control recovery needs every step of the path");
    }
    let snaps = path.snapshots();
    check_space(model, &snaps[0], "path")?;
    let grid = *path.grid();
    let space = model.space();
    let (n, nq, m) = (space.n_modes(), space.quad_nodes(), model.n_noise());
    let mut stepper = RhoStepper::new(model, grid.dt());
    let lambdas = model.lambdas();
    let nodes = space.nodes();

    let mut steps = Vec::with_capacity(grid.n_steps());
    let mut worst = 0.0_f64;
    let mut basis = vec![0.0; n];
    let mut col_n = vec![0.0; nq];
    let mut col_hat = vec![0.0; n];
    for k in 0..grid.n_steps() {
        // drift-free step, then the required control forcing per mode
        let mut free = snaps[k].coeffs().to_vec();
        stepper.step(&mut free, Forcing::None, false);
        let target: Vec<f64> = snaps[k + 1]
            .coeffs()
            .iter()
            .zip(&free)
            .zip(&stepper.phi1)
            .map(|((next, f), p)| (next - f) / p)
            .collect();
        // M = P diag(s(u)) E Lambda_Q on the noise modes, with u from the same step
        let u_n = &stepper.u_n;
        let mut mat = DMatrix::<f64>::zeros(n, m);
        for i in 0..m {
            basis.iter_mut().for_each(|b| *b = 0.0);
            basis[i] = lambdas[i];
            space.synthesize(&basis, &mut col_n);
            for j in 0..nq {
                col_n[j] *= model.diffusion.s(nodes[j], u_n[j]);
            }
            space.analyze(&col_n, &mut col_hat);
            for (r, &v) in col_hat.iter().enumerate() {
                mat[(r, i)] = v;
            }
        }
        let rhs = DVector::from_vec(target);
        let svd = mat.clone().svd(true, true);
        let sol = svd
            .solve(&rhs, 1e-13)
            .map_err(|e| Error::InternalConsistency(format!("least squares failed: {e}")))?;
        let resid = &rhs - &mat * &sol;
        let scale = rhs.norm().max(1.0);
        let rel = resid.norm() / scale;
        if rel > RECOVERY_TOLERANCE {
            let (mode, _) = resid
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .expect("non-empty residual");
            return Err(Error::UnsupportedControl { mode: mode + 1 });
        }
        worst = worst.max(rel);
        let mut c = vec![0.0; n];
        c[..m].copy_from_slice(sol.as_slice());
        steps.push(Field::from_coeffs(space, c)?);
    }
    Ok(RecoveredControl {
        control: ControlPath::from_fields(grid, steps)?,
        residual: worst,
    })
}

/// [`recover_control`] for a path given in `u`.
pub fn recover_control_from_u(
    u_path: &[Field],
    grid: &TimeGrid,
    model: &ModelSpec,
) -> Result<RecoveredControl> {
    let rho = u_path.iter().map(|u| rho_of_u(model, u)).collect();
    recover_control(&RhoTrajectory::new(*grid, 1, rho, false)?, model)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    pub max_iterations: usize,
    /// Stop once the gradient norm (in the action metric) falls below this.
    pub gradient_tolerance: f64,
    /// Length of the first trial step.
    pub initial_step: f64,
    /// Number of stored curvature pairs.
    pub memory: usize,
    /// Run the finite-difference gradient check at the returned control.
    pub gradient_check: bool,
    pub seed: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-9,
            initial_step: 1.0,
            memory: 10,
            gradient_check: true,
            seed: 0,
        }
    }
}

/// Endpoint-penalised minimal-action problem
/// `J(phi) = 1/2 |phi|^2 + |u^phi(T) - target|_H^2 / (2 eps)`.
#[derive(Debug, Clone)]
pub struct ActionProblem {
    pub model: ModelSpec,
    pub u0: Field,
    pub grid: TimeGrid,
    pub target: Field,
    pub penalty: f64,
    /// Number of solver steps per control step.
    pub control_stride: usize,
    pub settings: OptimizerSettings,
}

impl ActionProblem {
    pub fn new(model: ModelSpec, u0: Field, grid: TimeGrid, target: Field, penalty: f64) -> Result<Self> {
        check_space(&model, &u0, "initial datum")?;
        check_space(&model, &target, "target")?;
        if !(penalty > 0.0) {
            return invalid(format!("penalty parameter must be positive, got {penalty}"));
        }
        Ok(Self {
            model,
            u0,
            grid,
            target,
            penalty,
            control_stride: 1,
            settings: OptimizerSettings::default(),
        })
    }

    pub fn with_control_stride(mut self, stride: usize) -> Result<Self> {
        if stride == 0 || self.grid.n_steps() % stride != 0 {
            return invalid(format!("control stride {stride} does not divide {} steps", self.grid.n_steps()));
        }
        self.control_stride = stride;
        Ok(self)
    }

    pub fn with_settings(mut self, settings: OptimizerSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn control_grid(&self) -> TimeGrid {
        self.grid
            .coarsened(self.control_stride)
            .expect("stride validated on construction")
    }

    fn n_vars(&self) -> usize {
        self.control_grid().n_steps() * self.model.n_noise()
    }

    /// Scaled variables `y = sqrt(dt_c) phi` on the noise modes, so that the action is `|y|^2 / 2`.
    fn to_vars(&self, phi: &ControlPath) -> Result<Vec<f64>> {
        check_grid(&self.control_grid(), phi.grid(), "control")?;
        let m = self.model.n_noise();
        let sq = self.control_grid().dt().sqrt();
        let mut y = Vec::with_capacity(self.n_vars());
        for f in phi.steps() {
            check_space(&self.model, f, "control")?;
            if let Some(i) = f.coeffs()[m..].iter().position(|&c| c != 0.0) {
                return Err(Error::UnsupportedControl { mode: m + i + 1 });
            }
            y.extend(f.coeffs()[..m].iter().map(|c| sq * c));
        }
        Ok(y)
    }

    fn to_control(&self, y: &[f64]) -> ControlPath {
        let space = self.model.space();
        let m = self.model.n_noise();
        let grid = self.control_grid();
        let sq = grid.dt().sqrt();
        let steps = y
            .chunks(m.max(1))
            .take(grid.n_steps())
            .map(|c| {
                let mut v = vec![0.0; space.n_modes()];
                for (d, s) in v.iter_mut().zip(c) {
                    *d = s / sq;
                }
                Field::from_coeffs(space, v).expect("same space")
            })
            .collect::<Vec<_>>();
        let steps = if m == 0 {
            vec![Field::zeros(space); grid.n_steps()]
        } else {
            steps
        };
        ControlPath::from_fields(grid, steps).expect("grid matches")
    }
}

/// Objective pieces at one control.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveValue {
    pub objective: f64,
    pub action: f64,
    pub penalty_term: f64,
    /// `|u^phi(T) - target|_H`.
    pub endpoint_error: f64,
}

struct Evaluation {
    value: ObjectiveValue,
    grad: Vec<f64>,
}

fn forward(problem: &ActionProblem, y: &[f64]) -> Result<(Vec<Vec<f64>>, ObjectiveValue)> {
    let model = &problem.model;
    let m = model.n_noise();
    let stride = problem.control_stride;
    let sq = problem.control_grid().dt().sqrt();
    let mut stepper = RhoStepper::new(model, problem.grid.dt());
    let mut rho = rho_of_u(model, &problem.u0).into_coeffs();
    let mut states = Vec::with_capacity(problem.grid.n_steps() + 1);
    states.push(rho.clone());
    let mut phi = vec![0.0; m];
    for k in 0..problem.grid.n_steps() {
        let kc = k / stride;
        for (p, v) in phi.iter_mut().zip(&y[kc * m..(kc + 1) * m]) {
            *p = v / sq;
        }
        stepper.step(&mut rho, Forcing::Control(&phi), false);
        if !rho.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { step: k + 1 });
        }
        states.push(rho.clone());
    }
    let u_t = u_of_rho(model, &Field::from_coeffs(model.space(), rho)?);
    let err = (&u_t - &problem.target).sobolev_norm(0.0);
    let action = 0.5 * y.iter().map(|v| v * v).sum::<f64>();
    let penalty_term = 0.5 * err * err / problem.penalty;
    Ok((
        states,
        ObjectiveValue {
            objective: action + penalty_term,
            action,
            penalty_term,
            endpoint_error: err,
        },
    ))
}

/// Objective and its exact gradient with respect to the scaled variables, by
/// the adjoint of the discrete stepper.
fn evaluate(problem: &ActionProblem, y: &[f64]) -> Result<Evaluation> {
    let model = &problem.model;
    let space = model.space();
    let (n, nq, m) = (space.n_modes(), space.quad_nodes(), model.n_noise());
    let stride = problem.control_stride;
    let sq = problem.control_grid().dt().sqrt();
    let (states, value) = forward(problem, y)?;
    let stepper = RhoStepper::new(model, problem.grid.dt());
    let (decay, phi1, b_bar) = (&stepper.decay, &stepper.phi1, stepper.b_bar);
    let alphas = space.eigenvalues();
    let nodes = space.nodes();
    let lambdas = model.lambdas();

    let nodal_u = |rho: &[f64]| -> Vec<f64> {
        space
            .synthesize_vec(rho)
            .into_iter()
            .map(|r| model.g_inverse(r))
            .collect()
    };

    // terminal co-state: (1/eps) P(b E(u_T - target))
    let n_steps = problem.grid.n_steps();
    let u_last = nodal_u(&states[n_steps]);
    let u_hat = space.analyze_vec(&u_last);
    let diff: Vec<f64> = u_hat
        .iter()
        .zip(problem.target.coeffs())
        .map(|(a, b)| a - b)
        .collect();
    let mut diff_n = space.synthesize_vec(&diff);
    for (d, &u) in diff_n.iter_mut().zip(&u_last) {
        *d /= model.friction.gamma(u) * problem.penalty;
    }
    let mut lam = space.analyze_vec(&diff_n);

    let mut grad = y.to_vec();
    let mut mp = vec![0.0; n];
    let mut lm = vec![0.0; n];
    let mut e_mp = vec![0.0; nq];
    let mut e_lm = vec![0.0; nq];
    let mut c_hat = vec![0.0; n];
    let mut c_n = vec![0.0; nq];
    let mut buf_n = vec![0.0; nq];
    let mut t1 = vec![0.0; n];
    let mut t2 = vec![0.0; n];
    let mut t3 = vec![0.0; n];
    for k in (0..n_steps).rev() {
        let u_n = nodal_u(&states[k]);
        let kc = k / stride;
        c_hat.iter_mut().for_each(|c| *c = 0.0);
        for i in 0..m {
            c_hat[i] = lambdas[i] * y[kc * m + i] / sq;
        }
        space.synthesize(&c_hat, &mut c_n);
        for i in 0..n {
            mp[i] = phi1[i] * lam[i];
            lm[i] = alphas[i] * mp[i];
        }
        space.synthesize(&mp, &mut e_mp);
        space.synthesize(&lm, &mut e_lm);

        // control gradient: Lambda_Q P(s E m')
        for j in 0..nq {
            buf_n[j] = model.diffusion.s(nodes[j], u_n[j]) * e_mp[j];
        }
        space.analyze(&buf_n, &mut t3);
        for i in 0..m {
            grad[kc * m + i] += lambdas[i] * t3[i] / sq;
        }

        // state co-state step
        for j in 0..nq {
            buf_n[j] = e_lm[j] / model.friction.gamma(u_n[j]);
        }
        space.analyze(&buf_n, &mut t1);
        for j in 0..nq {
            let (x, u) = (nodes[j], u_n[j]);
            let b = 1.0 / model.friction.gamma(u);
            let w = model.reaction.df(x, u) * b + model.diffusion.ds(x, u) * b * c_n[j];
            buf_n[j] = w * e_mp[j];
        }
        space.analyze(&buf_n, &mut t2);
        for i in 0..n {
            lam[i] = decay[i] * lam[i] - t1[i] + b_bar * lm[i] + t2[i];
        }
    }
    Ok(Evaluation { value, grad })
}

/// One line of the finite-difference gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub direction: usize,
    pub magnitude: f64,
    pub adjoint: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

/// Compares the adjoint directional derivative with central differences along
/// seeded random unit directions (in the action metric). Errors are relative to
/// the larger of the two derivatives, floored at `1e-6 (1 + J)`.
pub fn gradient_check(
    problem: &ActionProblem,
    phi: &ControlPath,
    n_directions: usize,
    magnitudes: &[f64],
    seed: u64,
) -> Result<Vec<GradientCheck>> {
    let y = problem.to_vars(phi)?;
    let eval = evaluate(problem, &y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for d in 0..n_directions {
        let mut dir: Vec<f64> = (0..y.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        dir.iter_mut().for_each(|v| *v /= norm);
        let adjoint: f64 = eval.grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        for &h in magnitudes {
            let plus: Vec<f64> = y.iter().zip(&dir).map(|(a, b)| a + h * b).collect();
            let minus: Vec<f64> = y.iter().zip(&dir).map(|(a, b)| a - h * b).collect();
            let jp = forward(problem, &plus)?.1.objective;
            let jm = forward(problem, &minus)?.1.objective;
            let fd = (jp - jm) / (2.0 * h);
            // floor keeps the ratio meaningful where the gradient vanishes
            let scale = adjoint
                .abs()
                .max(fd.abs())
                .max(1e-6 * (1.0 + eval.value.objective.abs()));
            let relative_error = (fd - adjoint).abs() / scale;
            out.push(GradientCheck {
                direction: d,
                magnitude: h,
                adjoint,
                finite_difference: fd,
                relative_error,
            });
        }
    }
    Ok(out)
}

/// Objective at a control.
pub fn objective(problem: &ActionProblem, phi: &ControlPath) -> Result<ObjectiveValue> {
    let y = problem.to_vars(phi)?;
    Ok(forward(problem, &y)?.1)
}

/// Objective and gradient at a control; the gradient is returned as a control
/// path in the `L^2(0, T; H)` Riesz representation.
pub fn objective_and_gradient(
    problem: &ActionProblem,
    phi: &ControlPath,
) -> Result<(ObjectiveValue, ControlPath)> {
    let y = problem.to_vars(phi)?;
    let eval = evaluate(problem, &y)?;
    // y = sqrt(dt) phi, and the L^2 Riesz map divides by dt
    let sq = problem.control_grid().dt().sqrt();
    let g: Vec<f64> = eval.grad.iter().map(|v| v * sq).collect();
    Ok((eval.value, problem.to_control(&g)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub action: f64,
    pub endpoint_error: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct ActionResult {
    pub control: ControlPath,
    /// `1/2 |phi*|^2`.
    pub i_star: f64,
    pub value: ObjectiveValue,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
    pub gradient_check: Vec<GradientCheck>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimises the penalised objective from `initial` (zero if `None`) by
/// limited-memory BFGS with Armijo backtracking. Non-convergence returns the
/// best iterate with `converged = false`.
pub fn minimize_action(problem: &ActionProblem, initial: Option<&ControlPath>) -> Result<ActionResult> {
    let s = problem.settings;
    let mut y = match initial {
        Some(phi) => problem.to_vars(phi)?,
        None => vec![0.0; problem.n_vars()],
    };
    let mut eval = evaluate(problem, &y)?;
    let mut history = Vec::new();
    let mut pairs: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let mut converged = false;
    let record = |it: usize, e: &Evaluation| IterationRecord {
        iteration: it,
        objective: e.value.objective,
        action: e.value.action,
        endpoint_error: e.value.endpoint_error,
        grad_norm: dot(&e.grad, &e.grad).sqrt(),
    };
    for it in 0..=s.max_iterations {
        history.push(record(it, &eval));
        let gnorm = dot(&eval.grad, &eval.grad).sqrt();
        if gnorm <= s.gradient_tolerance {
            converged = true;
            break;
        }
        if it == s.max_iterations {
            break;
        }
        // two-loop recursion
        let mut q = eval.grad.clone();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (sv, yv, rho) in pairs.iter().rev() {
            let a = rho * dot(sv, &q);
            q.iter_mut().zip(yv).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = match pairs.back() {
            Some((sv, yv, _)) => dot(sv, yv) / dot(yv, yv),
            None => s.initial_step / gnorm.max(1.0),
        };
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((sv, yv, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(yv, &q);
            q.iter_mut().zip(sv).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&dir, &eval.grad);
        if !(slope < 0.0) {
            pairs.clear();
            dir = eval.grad.iter().map(|v| -v / gnorm.max(1.0)).collect();
            slope = dot(&dir, &eval.grad);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = y.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            match evaluate(problem, &trial) {
                Ok(e) if e.value.objective <= eval.value.objective + 1e-4 * step * slope => {
                    accepted = Some((trial, e));
                    break;
                }
                Ok(_) | Err(Error::BlowUp { .. }) => step *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some((y_new, e_new)) = accepted else {
            // no decrease along the search direction: stationary to working precision
            converged = gnorm <= 1e3 * s.gradient_tolerance;
            break;
        };
        let sv: Vec<f64> = y_new.iter().zip(&y).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = e_new.grad.iter().zip(&eval.grad).map(|(a, b)| a - b).collect();
        let sy = dot(&sv, &yv);
        if sy > 1e-14 * dot(&sv, &sv).sqrt() * dot(&yv, &yv).sqrt() && sy > 0.0 {
            if pairs.len() == s.memory.max(1) {
                pairs.pop_front();
            }
            pairs.push_back((sv, yv, 1.0 / sy));
        }
        let stalled = (eval.value.objective - e_new.value.objective).abs()
            <= 1e-15 * eval.value.objective.abs().max(1e-300);
        y = y_new;
        eval = e_new;
        if stalled {
            history.push(record(it + 1, &eval));
            converged = dot(&eval.grad, &eval.grad).sqrt() <= 1e3 * s.gradient_tolerance;
            break;
        }
    }
    let control = problem.to_control(&y);
    let gradient_check = if s.gradient_check && !y.is_empty() {
        let checks = gradient_check(problem, &control, 3, &[1e-5], s.seed)?;
        if let Some(bad) = checks.iter().find(|c| c.relative_error > 1e-3) {
            return Err(Error::InternalConsistency(format!(
                "adjoint gradient disagrees with central differences: relative error {:e} along direction {}",
                bad.relative_error, bad.direction
            )));
        }
        checks
    } else {
        Vec::new()
    };
    Ok(ActionResult {
        i_star: eval.value.action,
        control,
        value: eval.value,
        converged,
        history,
        gradient_check,
    })
}

/// Norm used to measure distance to the reference path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TubeNorm {
    H,
    Lp(f64),
}

impl TubeNorm {
    fn distance(self, a: &Field, b: &Field) -> Result<f64> {
        let d = a - b;
        match self {
            Self::H => Ok(d.sobolev_norm(0.0)),
            Self::Lp(p) => d.lp_norm(p),
        }
    }
}

/// Event measured from a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum RareEvent {
    /// The sure event.
    Everything,
    /// `sup_t |u(t) - reference(t)| <= radius` at the reference grid times.
    Tube {
        reference: Vec<Field>,
        reference_grid: TimeGrid,
        radius: f64,
        norm: TubeNorm,
    },
}

impl RareEvent {
    fn reference_grid(&self) -> Option<&TimeGrid> {
        match self {
            Self::Everything => None,
            Self::Tube { reference_grid, .. } => Some(reference_grid),
        }
    }

    fn contains(&self, path: &[Field]) -> Result<bool> {
        match self {
            Self::Everything => Ok(true),
            Self::Tube {
                reference,
                radius,
                norm,
                ..
            } => {
                if radius.is_infinite() {
                    return Ok(true);
                }
                for (u, r) in path.iter().zip(reference) {
                    if norm.distance(u, r)? > *radius {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }
}

/// Setup of a tilted Monte Carlo study of the wave equation with noise of scale `sqrt(mu)`.
#[derive(Debug, Clone)]
pub struct RareEventStudy {
    pub u0: Field,
    pub v0: Field,
    pub horizon: f64,
    /// Steps of the control/reference grid; wave grids refine it.
    pub base_steps: usize,
    pub event: RareEvent,
    pub n_samples: usize,
    pub tilt: Option<ControlPath>,
    pub seed: u64,
    pub wave_options: WaveOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RareEventRow {
    pub mu: f64,
    pub p_hat: f64,
    pub std_error: f64,
    /// `log p_hat`, finite even when `p_hat` underflows.
    pub log_p_hat: f64,
    pub minus_mu_log_p: f64,
    pub hits: usize,
    pub n_samples: usize,
    /// Set when no sample hit the event without a tilt.
    pub recommend_tilt: bool,
}

/// Wave grid for `mu`: the coarsest refinement of `base_steps` that satisfies the
/// stability bound.
pub fn wave_grid_for(model: &ModelSpec, mu: f64, horizon: f64, base_steps: usize) -> Result<TimeGrid> {
    let dt_max = max_stable_dt(model, mu);
    let base = TimeGrid::new(horizon, base_steps)?;
    let factor = (base.dt() / dt_max * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    TimeGrid::new(horizon, base_steps * factor)
}

/// Importance-sampled `P(event)` for every `mu`, with per-sample streams so that the
/// table is deterministic given the seed.
pub fn estimate_rare_event(model: &ModelSpec, mus: &[f64], study: &RareEventStudy) -> Result<Vec<RareEventRow>> {
    if study.n_samples == 0 {
        return invalid("n_samples must be positive");
    }
    let base = TimeGrid::new(study.horizon, study.base_steps)?;
    if let Some(g) = study.event.reference_grid() {
        check_grid(&base, g, "event reference")?;
        if let RareEvent::Tube { reference, radius, .. } = &study.event {
            if reference.len() != base.n_steps() + 1 {
                return invalid("reference path needs one field per base grid time");
            }
            if !(*radius > 0.0) {
                return invalid("tube radius must be positive");
            }
        }
    }
    if let Some(t) = &study.tilt {
        check_grid(&base, t.grid(), "tilt")?;
    }
    let mut rows = Vec::with_capacity(mus.len());
    for (mi, &mu) in mus.iter().enumerate() {
        let grid = wave_grid_for(model, mu, study.horizon, study.base_steps)?;
        let factor = grid.n_steps() / base.n_steps();
        let tilt = match &study.tilt {
            Some(t) => Some(t.refine_to(&grid)?),
            None => None,
        };
        let opts = WaveOptions {
            save_stride: factor,
            ..study.wave_options
        };
        let samples: Vec<Result<(bool, f64)>> = (0..study.n_samples)
            .into_par_iter()
            .map(|s| {
                let stream = ((mi as u64) << 40) | s as u64;
                let xi = sample_for_model(model, &grid, study.seed, stream);
                let traj = integrate_wave(
                    model,
                    mu,
                    NoiseScale::SqrtMu,
                    &study.u0,
                    &study.v0,
                    &grid,
                    Some(&xi),
                    tilt.as_ref().map(|t| t as &dyn crate::noise::ControlSource),
                    &opts,
                )?;
                let hit = study.event.contains(&traj.u_snapshots())?;
                let lw = match &tilt {
                    Some(t) => girsanov_log_weight(t, &xi, mu)?,
                    None => 0.0,
                };
                Ok((hit, lw))
            })
            .collect();
        let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
        rows.push(aggregate(mu, &samples, study.tilt.is_none()));
    }
    Ok(rows)
}

fn aggregate(mu: f64, samples: &[(bool, f64)], untilted: bool) -> RareEventRow {
    let n = samples.len();
    let hits = samples.iter().filter(|s| s.0).count();
    if hits == 0 {
        return RareEventRow {
            mu,
            p_hat: 0.0,
            std_error: 0.0,
            log_p_hat: f64::NEG_INFINITY,
            minus_mu_log_p: f64::INFINITY,
            hits,
            n_samples: n,
            recommend_tilt: untilted,
        };
    }
    // log-sum-exp over the hits
    let m = samples
        .iter()
        .filter(|s| s.0)
        .map(|s| s.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = samples
        .iter()
        .map(|&(hit, lw)| if hit { (lw - m).exp() } else { 0.0 })
        .collect();
    let mean = scaled.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        scaled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let log_p_hat = m + mean.ln();
    RareEventRow {
        mu,
        p_hat: log_p_hat.exp(),
        std_error: m.exp() * (var / n as f64).sqrt(),
        log_p_hat,
        minus_mu_log_p: -mu * log_p_hat,
        hits,
        n_samples: n,
        recommend_tilt: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralSpace;

    #[test]
    fn action_examples() {
        let space = SpectralSpace::with_default_quadrature(1.0, 3).unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let e1 = Field::mode(&space, 1).unwrap();
        let phi = ControlPath::constant(&e1, grid);
        assert!((action_of_control(&phi) - 0.5).abs() < 1e-12);
        assert!((action_of_control(&phi.scaled(3.0)) - 4.5).abs() < 1e-12);
        assert_eq!(action_of_control(&ControlPath::zeros(&space, grid)), 0.0);
    }

    #[test]
    fn aggregation_of_sure_event() {
        let row = aggregate(0.1, &[(true, 0.0); 10], true);
        assert_eq!(row.p_hat, 1.0);
        assert_eq!(row.minus_mu_log_p, 0.0);
        let none = aggregate(0.1, &[(false, 0.0); 10], true);
        assert!(none.recommend_tilt && none.p_hat == 0.0);
    }
}
