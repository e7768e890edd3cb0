//! Q-Wiener increments, deterministic and feedback controls, and the Girsanov
//! weight of a control tilt.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::model::{DiffusionSpec, ModelSpec};
use crate::spectral::{Field, SpectralSpace, TimeGrid};

/// Increments `dW_{k,i} ~ N(0, lambda_i^2 dt)` of the retained noise modes.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrements {
    grid: TimeGrid,
    lambdas: Vec<f64>,
    // row-major: step k, mode i
    data: Vec<f64>,
    seed: u64,
    stream: u64,
}

impl NoiseIncrements {
    /// All-zero increments.
    pub fn zeros(grid: TimeGrid, lambdas: &[f64]) -> Self {
        Self {
            grid,
            lambdas: lambdas.to_vec(),
            data: vec![0.0; grid.n_steps() * lambdas.len()],
            seed: 0,
            stream: 0,
        }
    }

    /// Wraps explicit increments, laid out step by step.
    pub fn from_raw(grid: TimeGrid, lambdas: &[f64], data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.n_steps() * lambdas.len() {
            return invalid(format!(
                "expected {} increments, got {}",
                grid.n_steps() * lambdas.len(),
                data.len()
            ));
        }
        Ok(Self {
            grid,
            lambdas: lambdas.to_vec(),
            data,
            seed: 0,
            stream: 0,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn n_noise(&self) -> usize {
        self.lambdas.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Increments of step `k` over the retained modes.
    pub fn step(&self, k: usize) -> &[f64] {
        let n = self.lambdas.len();
        &self.data[k * n..(k + 1) * n]
    }

    /// Increments of mode `i` (1-based) over all steps.
    pub fn mode_series(&self, i: usize) -> Vec<f64> {
        let n = self.lambdas.len();
        (0..self.grid.n_steps())
            .map(|k| self.data[k * n + i - 1])
            .collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Sums blocks of `factor` consecutive increments; the result drives the same
    /// Brownian path on the coarser grid.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.coarsened(factor)?;
        let n = self.lambdas.len();
        let mut data = vec![0.0; grid.n_steps() * n];
        for k in 0..self.grid.n_steps() {
            let dst = (k / factor) * n;
            for i in 0..n {
                data[dst + i] += self.data[k * n + i];
            }
        }
        Ok(Self {
            grid,
            lambdas: self.lambdas.clone(),
            data,
            seed: self.seed,
            stream: self.stream,
        })
    }
}

/// Draws the increments of `stream` under `seed`. Each `(seed, stream)` pair maps to
/// its own ChaCha8 stream, so the output is bit-reproducible and independent
/// of how trajectories are distributed over threads.
pub fn sample_increments(
    space: &SpectralSpace,
    diffusion: &DiffusionSpec,
    grid: &TimeGrid,
    seed: u64,
    stream: u64,
) -> Result<NoiseIncrements> {
    if diffusion.n_noise > space.n_modes() {
        return invalid(format!(
            "n_noise ({}) exceeds n_modes ({})",
            diffusion.n_noise,
            space.n_modes()
        ));
    }
    Ok(draw(grid, &diffusion.lambdas(), seed, stream))
}

/// [`sample_increments`] for the noise modes of a model.
pub fn sample_for_model(
    model: &ModelSpec,
    grid: &TimeGrid,
    seed: u64,
    stream: u64,
) -> NoiseIncrements {
    draw(grid, model.lambdas(), seed, stream)
}

fn draw(grid: &TimeGrid, lambdas: &[f64], seed: u64, stream: u64) -> NoiseIncrements {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let sqrt_dt = grid.dt().sqrt();
    let n = lambdas.len();
    let mut data = Vec::with_capacity(grid.n_steps() * n);
    for _ in 0..grid.n_steps() {
        for &l in lambdas {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(l * sqrt_dt * z);
        }
    }
    NoiseIncrements {
        grid: *grid,
        lambdas: lambdas.to_vec(),
        data,
        seed,
        stream,
    }
}

/// Piecewise-constant control: `phi_k` acts on `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath {
    grid: TimeGrid,
    steps: Vec<Field>,
    radius: Option<f64>,
}

impl ControlPath {
    pub fn zeros(space: &Arc<SpectralSpace>, grid: TimeGrid) -> Self {
        Self {
            grid,
            steps: vec![Field::zeros(space); grid.n_steps()],
            radius: None,
        }
    }

    pub fn constant(field: &Field, grid: TimeGrid) -> Self {
        Self {
            grid,
            steps: vec![field.clone(); grid.n_steps()],
            radius: None,
        }
    }

    pub fn from_fields(grid: TimeGrid, steps: Vec<Field>) -> Result<Self> {
        if steps.len() != grid.n_steps() {
            return invalid(format!(
                "control has {} steps, grid has {}",
                steps.len(),
                grid.n_steps()
            ));
        }
        if let Some(first) = steps.first() {
            if steps.iter().any(|f| !Arc::ptr_eq(f.space(), first.space())) {
                return invalid("control steps live on different spaces");
            }
        }
        Ok(Self {
            grid,
            steps,
            radius: None,
        })
    }

    /// Samples `phi(t, x)` at the left end of each step.
    pub fn from_fn(
        space: &Arc<SpectralSpace>,
        grid: TimeGrid,
        phi: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let steps = (0..grid.n_steps())
            .map(|k| {
                let t = grid.time(k);
                Field::from_fn(space, |x| phi(t, x))
            })
            .collect();
        Self {
            grid,
            steps,
            radius: None,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn steps(&self) -> &[Field] {
        &self.steps
    }

    pub fn steps_mut(&mut self) -> &mut [Field] {
        &mut self.steps
    }

    pub fn at_step(&self, k: usize) -> &Field {
        &self.steps[k]
    }

    /// Declared radius `M` of the admissible ball, if any.
    pub fn radius(&self) -> Option<f64> {
        self.radius
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = Some(radius);
        self
    }

    /// `(sum_k dt |phi_k|_H^2)^(1/2)`.
    pub fn norm(&self) -> f64 {
        let dt = self.grid.dt();
        self.steps
            .iter()
            .map(|f| dt * f.sobolev_norm(0.0).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Radial projection onto the ball of radius `m`.
    pub fn project_to_ball(&self, m: f64) -> Result<Self> {
        if !(m >= 0.0) {
            return invalid(format!("ball radius must be nonnegative, got {m}"));
        }
        let norm = self.norm();
        let mut out = if norm > m {
            self.scaled(m / norm)
        } else {
            self.clone()
        };
        out.radius = Some(m);
        Ok(out)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            steps: self.steps.iter().map(|f| c * f).collect(),
            radius: self.radius,
        }
    }

    /// The same piecewise-constant function on a grid whose step count is a
    /// multiple of this one.
    pub fn refine_to(&self, grid: &TimeGrid) -> Result<Self> {
        let n = self.grid.n_steps();
        if grid.n_steps() % n != 0 || (grid.horizon() - self.grid.horizon()).abs() > 1e-12 {
            return invalid("target grid is not a refinement of the control grid");
        }
        let factor = grid.n_steps() / n;
        Ok(Self {
            grid: *grid,
            steps: (0..grid.n_steps())
                .map(|k| self.steps[k / factor].clone())
                .collect(),
            radius: self.radius,
        })
    }

    /// Block averages on a coarser grid (the `L^2` projection onto coarser
    /// piecewise constants).
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.coarsened(factor)?;
        let steps = self
            .steps
            .chunks(factor)
            .map(|block| {
                let mut acc = block[0].clone();
                for f in &block[1..] {
                    acc = &acc + f;
                }
                (1.0 / factor as f64) * &acc
            })
            .collect();
        Ok(Self {
            grid,
            steps,
            radius: self.radius,
        })
    }
}

/// A non-anticipating control: the value on step `k` may depend on the step, the
/// time and the current state only.
pub trait ControlSource: Sync {
    fn control(&self, k: usize, t: f64, u: &Field) -> Field;
}

impl ControlSource for ControlPath {
    fn control(&self, k: usize, _t: f64, _u: &Field) -> Field {
        self.steps[k].clone()
    }
}

/// State-feedback control `phi_k = law(t_k, u(t_k))`.
pub struct FeedbackControl<F> {
    law: F,
}

impl<F> FeedbackControl<F>
where
    F: Fn(f64, &Field) -> Field + Sync,
{
    pub fn new(law: F) -> Self {
        Self { law }
    }
}

impl<F> ControlSource for FeedbackControl<F>
where
    F: Fn(f64, &Field) -> Field + Sync,
{
    fn control(&self, _k: usize, t: f64, u: &Field) -> Field {
        (self.law)(t, u)
    }
}

/// Log-likelihood ratio `log dP/dQ` of the untilted law with respect to the law in
/// which the drift `sigma(u) Q phi` is added to noise of scale `sqrt(mu)`.
pub fn girsanov_log_weight(phi: &ControlPath, xi: &NoiseIncrements, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return invalid(format!("mu must be positive, got {mu}"));
    }
    if phi.grid.n_steps() != xi.grid.n_steps()
        || (phi.grid.horizon() - xi.grid.horizon()).abs() > 1e-12
    {
        return invalid("control and increments live on different grids");
    }
    let dt = phi.grid.dt();
    let n = xi.n_noise();
    let mut linear = 0.0;
    let mut quadratic = 0.0;
    for (k, f) in phi.steps.iter().enumerate() {
        let dw = xi.step(k);
        for (i, &c) in f.coeffs().iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let lambda = if i < n { xi.lambdas[i] } else { 0.0 };
            if lambda == 0.0 {
                return Err(Error::UnsupportedControl { mode: i + 1 });
            }
            linear += c * dw[i] / lambda;
            quadratic += c * c;
        }
    }
    Ok(-linear / mu.sqrt() - 0.5 * dt * quadratic / mu)
}
