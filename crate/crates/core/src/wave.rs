//! Damped stochastic wave equation
//! `mu u_tt = Laplacian u - gamma(u) u_t + f(u) + sigma(u) Q phi + eps sigma(u) dw^Q/dt`
//! on the Galerkin space, with energy diagnostics and the map `rho = g(u)`.

use crate::error::{invalid, Error, Result};
use crate::model::ModelSpec;
use crate::noise::{ControlPath, ControlSource, NoiseIncrements};
use crate::parabolic::{check_grid, check_space, rho_of_u, RhoTrajectory};
use crate::spectral::{Field, TimeGrid};

/// Scale `eps` of the noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseScale {
    /// `eps = 1`: the small-mass regime.
    Unit,
    /// `eps = sqrt(mu)`: the large-deviation regime.
    SqrtMu,
}

impl NoiseScale {
    pub fn factor(self, mu: f64) -> f64 {
        match self {
            Self::Unit => 1.0,
            Self::SqrtMu => mu.sqrt(),
        }
    }
}

/// Level of the linear extension of `f` outside `[-n, n]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Truncation {
    /// `n = 10 max(1, |u0|_{H^1})`.
    #[default]
    Auto,
    Level(f64),
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveOptions {
    pub save_stride: usize,
    pub truncation: Truncation,
}

impl Default for WaveOptions {
    fn default() -> Self {
        Self {
            save_stride: 1,
            truncation: Truncation::Auto,
        }
    }
}

/// Largest admissible step `0.5 sqrt(mu / alpha_max)`.
pub fn max_stable_dt(model: &ModelSpec, mu: f64) -> f64 {
    0.5 * mu.sqrt() / model.space().max_eigenvalue().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub u: Field,
    pub v: Field,
    pub t: f64,
    pub mu: f64,
}

impl WaveState {
    /// `eta = v + g(u)`.
    pub fn eta(&self, model: &ModelSpec) -> Field {
        &self.v + &rho_of_u(model, &self.u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveTrajectory {
    grid: TimeGrid,
    stride: usize,
    mu: f64,
    states: Vec<WaveState>,
    v_sq_integral: Vec<f64>,
    truncation_level: Option<f64>,
    truncation_activated: bool,
    applied_control: Option<ControlPath>,
    stochastic: bool,
}

impl WaveTrajectory {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn states(&self) -> &[WaveState] {
        &self.states
    }

    pub fn last(&self) -> &WaveState {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn u_snapshots(&self) -> Vec<Field> {
        self.states.iter().map(|s| s.u.clone()).collect()
    }

    /// `int_0^t |v|_H^2 ds` at every snapshot, accumulated per step.
    pub fn v_sq_integral(&self) -> &[f64] {
        &self.v_sq_integral
    }

    pub fn truncation_level(&self) -> Option<f64> {
        self.truncation_level
    }

    /// Whether `|u| > n` occurred at a node, so that the truncated reaction differed from `f`.
    pub fn truncation_activated(&self) -> bool {
        self.truncation_activated
    }

    /// The control values actually applied, step by step.
    pub fn applied_control(&self) -> Option<&ControlPath> {
        self.applied_control.as_ref()
    }

    pub fn is_stochastic(&self) -> bool {
        self.stochastic
    }
}

struct LocalStep<'a> {
    model: &'a ModelSpec,
    mu: f64,
    level: Option<f64>,
    activated: bool,
}

impl LocalStep<'_> {
    /// Exact flow of `mu v' = -gamma(u) v + f(u) + s(u) c` over `h` with `u` frozen.
    fn apply(&mut self, u_n: &[f64], v_n: &mut [f64], c_n: Option<&[f64]>, h: f64) {
        let nodes = self.model.space().nodes();
        for j in 0..v_n.len() {
            let (x, u) = (nodes[j], u_n[j]);
            let gamma = self.model.friction.gamma(u);
            let mut force = match self.level {
                Some(n) => {
                    if u.abs() > n {
                        self.activated = true;
                    }
                    self.model.f_truncated(n, x, u)
                }
                None => self.model.f_eval(x, u),
            };
            if let Some(c) = c_n {
                force += self.model.diffusion.s(x, u) * c[j];
            }
            let decay = (-gamma * h / self.mu).exp();
            v_n[j] = v_n[j] * decay + force * (1.0 - decay) / gamma;
        }
    }
}

/// Strang splitting: half a step of the local friction/forcing flow in nodal
/// space, the exact rotation of every mode under `mu u'' = -alpha_i u`, a second
/// local half step, then the noise kick `eps sigma(u) dW / mu`.
#[allow(clippy::too_many_arguments)]
pub fn integrate_wave(
    model: &ModelSpec,
    mu: f64,
    noise_scale: NoiseScale,
    u0: &Field,
    v0: &Field,
    grid: &TimeGrid,
    noise: Option<&NoiseIncrements>,
    control: Option<&dyn ControlSource>,
    opts: &WaveOptions,
) -> Result<WaveTrajectory> {
    if !(mu > 0.0) || !mu.is_finite() {
        return invalid(format!("mu must be positive, got {mu}"));
    }
    check_space(model, u0, "u0")?;
    check_space(model, v0, "v0")?;
    let dt = grid.dt();
    let dt_max = max_stable_dt(model, mu);
    if dt > dt_max * (1.0 + 1e-12) {
        return invalid(format!(
            "dt = {dt:e} exceeds the stability bound 0.5 sqrt(mu / alpha_max) = {dt_max:e}"
        ));
    }
    if let Some(xi) = noise {
        check_grid(grid, xi.grid(), "noise")?;
        if xi.n_noise() > model.space().n_modes() {
            return invalid("noise has more modes than the space");
        }
    }
    let stride = opts.save_stride;
    if stride == 0 || grid.n_steps() % stride != 0 {
        return invalid(format!("save stride {stride} does not divide {} steps", grid.n_steps()));
    }
    let level = match opts.truncation {
        Truncation::Auto => Some(10.0 * u0.sobolev_norm(1.0).max(1.0)),
        Truncation::Level(n) if n > 0.0 => Some(n),
        Truncation::Level(n) => return invalid(format!("truncation level must be positive, got {n}")),
        Truncation::Off => None,
    };

    let space = model.space();
    let (n, nq) = (space.n_modes(), space.quad_nodes());
    let eps = noise_scale.factor(mu);
    let (cosines, sines, omegas): (Vec<f64>, Vec<f64>, Vec<f64>) = {
        let mut c = Vec::with_capacity(n);
        let mut s = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        for a in space.eigenvalues() {
            let omega = (a / mu).sqrt();
            c.push((omega * dt).cos());
            s.push((omega * dt).sin());
            w.push(omega);
        }
        (c, s, w)
    };

    let mut u = u0.coeffs().to_vec();
    let mut v = v0.coeffs().to_vec();
    let mut u_n = space.synthesize_vec(&u);
    let mut v_n = vec![0.0; nq];
    let mut c_hat = vec![0.0; n];
    let mut c_n = vec![0.0; nq];
    let mut w_hat = vec![0.0; n];
    let mut w_n = vec![0.0; nq];
    let mut local = LocalStep {
        model,
        mu,
        level,
        activated: false,
    };
    let v_sq = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>();

    let mut states = Vec::with_capacity(grid.n_steps() / stride + 1);
    states.push(WaveState {
        u: u0.clone(),
        v: v0.clone(),
        t: 0.0,
        mu,
    });
    let mut v_int = vec![0.0];
    let mut running = 0.0;
    let mut applied = control.map(|_| Vec::with_capacity(grid.n_steps()));

    for k in 0..grid.n_steps() {
        let t = grid.time(k);
        let v_sq_before = v_sq(&v);
        let has_control = if let Some(ctrl) = control {
            let phi = ctrl.control(k, t, &Field::from_coeffs(space, u.clone())?);
            check_space(model, &phi, "control")?;
            c_hat.iter_mut().for_each(|c| *c = 0.0);
            for ((c, &p), &l) in c_hat.iter_mut().zip(phi.coeffs()).zip(model.lambdas()) {
                *c = l * p;
            }
            space.synthesize(&c_hat, &mut c_n);
            if let Some(a) = applied.as_mut() {
                a.push(phi);
            }
            true
        } else {
            false
        };
        let c_opt = has_control.then_some(c_n.as_slice());

        space.synthesize(&v, &mut v_n);
        local.apply(&u_n, &mut v_n, c_opt, 0.5 * dt);
        space.analyze(&v_n, &mut v);
        for i in 0..n {
            let (ui, vi) = (u[i], v[i]);
            u[i] = ui * cosines[i] + vi / omegas[i] * sines[i];
            v[i] = -ui * omegas[i] * sines[i] + vi * cosines[i];
        }
        space.synthesize(&u, &mut u_n);
        space.synthesize(&v, &mut v_n);
        local.apply(&u_n, &mut v_n, c_opt, 0.5 * dt);
        if let Some(xi) = noise {
            let dw = xi.step(k);
            w_hat.iter_mut().for_each(|w| *w = 0.0);
            w_hat[..dw.len()].copy_from_slice(dw);
            space.synthesize(&w_hat, &mut w_n);
            let nodes = space.nodes();
            for j in 0..nq {
                v_n[j] += eps * model.diffusion.s(nodes[j], u_n[j]) * w_n[j] / mu;
            }
        }
        space.analyze(&v_n, &mut v);

        if !u.iter().chain(&v).all(|x| x.is_finite()) {
            return Err(Error::BlowUp { step: k + 1 });
        }
        running += 0.5 * dt * (v_sq_before + v_sq(&v));
        if (k + 1) % stride == 0 {
            states.push(WaveState {
                u: Field::from_coeffs(space, u.clone())?,
                v: Field::from_coeffs(space, v.clone())?,
                t: grid.time(k + 1),
                mu,
            });
            v_int.push(running);
        }
    }
    let applied_control = match applied {
        Some(steps) => Some(ControlPath::from_fields(*grid, steps)?),
        None => None,
    };
    Ok(WaveTrajectory {
        grid: *grid,
        stride,
        mu,
        states,
        v_sq_integral: v_int,
        truncation_level: level,
        truncation_activated: local.activated,
        applied_control,
        stochastic: noise.is_some(),
    })
}

/// Energy quantities at every snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    /// `|u|_{H^1}^2`.
    pub h1_sq: Vec<f64>,
    /// `|u|_{L^{theta+1}}^{theta+1}`.
    pub lp_pow: Vec<f64>,
    /// `mu |v|_H^2`.
    pub kinetic: Vec<f64>,
    /// `int_0^t |v|_H^2 ds`.
    pub v_sq_integral: Vec<f64>,
    /// `|u|_{H^1}^2 + int (c_2 - primitive(u)) dx + mu |v|_H^2`.
    pub l_mu: Vec<f64>,
    /// `|u|_{H^1}^2 / 2 + mu |v|_H^2 / 2 - int primitive(u) dx`.
    pub energy: Vec<f64>,
}

impl EnergyReport {
    pub fn sup_l_mu(&self) -> f64 {
        self.l_mu.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_kinetic(&self) -> f64 {
        self.kinetic.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_h1_sq(&self) -> f64 {
        self.h1_sq.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `int_0^T |u|_{H^1}^2 dt` by the trapezoid rule.
    pub fn h1_sq_integral(&self) -> f64 {
        trapezoid(&self.times, &self.h1_sq)
    }

    /// `int_0^T |u|_{L^{theta+1}}^{theta+1} dt` by the trapezoid rule.
    pub fn lp_pow_integral(&self) -> f64 {
        trapezoid(&self.times, &self.lp_pow)
    }

    /// Largest one-snapshot increase of the discrete energy.
    pub fn max_energy_increase(&self) -> f64 {
        self.energy
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2)
        .zip(y.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

pub fn energy_diagnostics(traj: &WaveTrajectory, model: &ModelSpec) -> EnergyReport {
    let space = model.space();
    let h = space.spacing();
    let nodes = space.nodes();
    let theta = model.reaction.theta();
    let c2 = model.reaction.c2();
    let length = space.length();
    let mut r = EnergyReport {
        times: Vec::new(),
        h1_sq: Vec::new(),
        lp_pow: Vec::new(),
        kinetic: Vec::new(),
        v_sq_integral: traj.v_sq_integral.clone(),
        l_mu: Vec::new(),
        energy: Vec::new(),
    };
    for s in &traj.states {
        let un = s.u.nodal();
        let h1 = s.u.sobolev_norm(1.0).powi(2);
        let lp = h * un.iter().map(|x| x.abs().powf(theta + 1.0)).sum::<f64>();
        let kin = traj.mu * s.v.sobolev_norm(0.0).powi(2);
        let prim = h * nodes
            .iter()
            .zip(&un)
            .map(|(&x, &v)| model.antiderivative_eval(x, v))
            .sum::<f64>();
        r.times.push(s.t);
        r.h1_sq.push(h1);
        r.lp_pow.push(lp);
        r.kinetic.push(kin);
        r.l_mu.push(h1 + c2 * length - prim + kin);
        r.energy.push(0.5 * h1 + 0.5 * kin - prim);
    }
    r
}

/// `rho = g(u)` at every snapshot; fails if `|rho|_H <= gamma_1 |u|_H` or
/// `|rho|_{H^1} <= gamma_1 |u|_{H^1}` is violated beyond discretisation tolerance.
pub fn rho_transform(traj: &WaveTrajectory, model: &ModelSpec) -> Result<RhoTrajectory> {
    let gamma1 = model.gamma1();
    let mut out = Vec::with_capacity(traj.states.len());
    for (j, s) in traj.states.iter().enumerate() {
        let rho = rho_of_u(model, &s.u);
        for (index, tol) in [(0.0, 1e-10), (1.0, 1e-2)] {
            let (lhs, rhs) = (rho.sobolev_norm(index), gamma1 * s.u.sobolev_norm(index));
            if lhs > rhs * (1.0 + tol) + 1e-12 {
                return Err(Error::InternalConsistency(format!(
                    "snapshot {j}: |g(u)|_(H^{index}) = {lhs} exceeds gamma_1 |u| = {rhs}"
                )));
            }
        }
        out.push(rho);
    }
    RhoTrajectory::new(*traj.grid(), traj.stride, out, traj.stochastic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiffusionSpec, FrictionSpec, Multiplier, NoiseSpectrum, ReactionSpec};
    use crate::spectral::SpectralSpace;
    use std::f64::consts::PI;

    fn oscillator_model() -> ModelSpec {
        let space = SpectralSpace::with_default_quadrature(1.0, 4).unwrap();
        ModelSpec::new(
            &space,
            FrictionSpec::Constant { gamma: 1.0 },
            ReactionSpec::Lipschitz { c: 0.0, h: 0.0 },
            DiffusionSpec {
                multiplier: Multiplier::Constant { value: 0.0 },
                spectrum: NoiseSpectrum::Explicit { values: vec![1.0] },
                n_noise: 1,
            },
        )
        .unwrap()
    }

    #[test]
    fn unstable_step_rejected() {
        let m = oscillator_model();
        let u0 = Field::mode(m.space(), 1).unwrap();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let r = integrate_wave(
            &m,
            1.0,
            NoiseScale::Unit,
            &u0,
            &Field::zeros(m.space()),
            &grid,
            None,
            None,
            &WaveOptions::default(),
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn damped_oscillator_closed_form() {
        let m = oscillator_model();
        let u0 = Field::mode(m.space(), 1).unwrap();
        let grid = TimeGrid::new(1.0, 10_000).unwrap();
        let traj = integrate_wave(
            &m,
            1.0,
            NoiseScale::Unit,
            &u0,
            &Field::zeros(m.space()),
            &grid,
            None,
            None,
            &WaveOptions::default(),
        )
        .unwrap();
        // u'' + u' + pi^2 u = 0, u(0) = 1, u'(0) = 0
        let w = (PI * PI - 0.25).sqrt();
        let exact = (-0.5f64).exp() * (w.cos() + 0.5 / w * w.sin());
        assert!((traj.last().u.coeffs()[0] - exact).abs() < 1e-3);
        assert!(!traj.truncation_activated());
    }
}
