//! Solvers for the overdamped limit in the variable `rho = g(u)`, where the
//! friction turns into the quasilinear diffusion `div(b(rho) grad rho) = Laplacian(g^{-1}(rho))`.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::model::ModelSpec;
use crate::noise::{ControlPath, NoiseIncrements};
use crate::spectral::{Field, SpectralSpace, TimeGrid};

/// Snapshots of `rho` on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoTrajectory {
    grid: TimeGrid,
    stride: usize,
    rho: Vec<Field>,
    stochastic: bool,
}

impl RhoTrajectory {
    pub fn new(grid: TimeGrid, stride: usize, rho: Vec<Field>, stochastic: bool) -> Result<Self> {
        if stride == 0 || grid.n_steps() % stride != 0 {
            return invalid(format!("stride {stride} does not divide {} steps", grid.n_steps()));
        }
        if rho.len() != grid.n_steps() / stride + 1 {
            return invalid(format!(
                "expected {} snapshots, got {}",
                grid.n_steps() / stride + 1,
                rho.len()
            ));
        }
        Ok(Self {
            grid,
            stride,
            rho,
            stochastic,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn snapshots(&self) -> &[Field] {
        &self.rho
    }

    pub fn last(&self) -> &Field {
        self.rho.last().expect("trajectory holds the initial state")
    }

    /// Whether the path was driven by noise increments.
    pub fn is_stochastic(&self) -> bool {
        self.stochastic
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.rho.len())
            .map(|j| self.grid.time(j * self.stride))
            .collect()
    }

    /// Grid on which the snapshots are equally spaced.
    pub fn snapshot_grid(&self) -> TimeGrid {
        TimeGrid::new(self.grid.horizon(), self.grid.n_steps() / self.stride)
            .expect("snapshot grid inherits a valid horizon")
    }

    /// `u = g^{-1}(rho)` at every snapshot.
    pub fn u_snapshots(&self, model: &ModelSpec) -> Vec<Field> {
        self.rho.iter().map(|r| u_of_rho(model, r)).collect()
    }
}

/// `P g^{-1}(rho)`.
pub fn u_of_rho(model: &ModelSpec, rho: &Field) -> Field {
    let space = rho.space();
    let un: Vec<f64> = rho.nodal().iter().map(|&y| model.g_inverse(y)).collect();
    Field::from_coeffs(space, space.analyze_vec(&un)).expect("same space")
}

/// `P g(u)`.
pub fn rho_of_u(model: &ModelSpec, u: &Field) -> Field {
    let space = u.space();
    let rn: Vec<f64> = u.nodal().iter().map(|&v| model.g_eval(v)).collect();
    Field::from_coeffs(space, space.analyze_vec(&rn)).expect("same space")
}

/// Which limit equation `solve_limit_spde` integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitVariant {
    /// `d rho = [Laplacian(g^{-1} rho) + F_g(rho)] dt + sigma_g(rho) dw^Q`.
    RhoForm,
    /// `gamma(u) du = [Laplacian u + f(u) + corrector(u)] dt + sigma(u) dw^Q`, stepped in `u`.
    UFormWithCorrector,
    /// The limit without the corrector drift, stepped in `rho`.
    RhoFormWithoutCorrector,
}

pub(crate) fn check_space(model: &ModelSpec, f: &Field, what: &str) -> Result<()> {
    let (a, b) = (model.space(), f.space());
    if Arc::ptr_eq(a, b)
        || (a.n_modes() == b.n_modes()
            && a.quad_nodes() == b.quad_nodes()
            && a.length() == b.length())
    {
        Ok(())
    } else {
        invalid(format!("{what} does not live on the model space"))
    }
}

pub(crate) fn check_grid(a: &TimeGrid, b: &TimeGrid, what: &str) -> Result<()> {
    if a.n_steps() == b.n_steps() && (a.horizon() - b.horizon()).abs() <= 1e-12 * a.horizon() {
        Ok(())
    } else {
        invalid(format!("{what} lives on a different time grid"))
    }
}

/// Exponential-Euler factors of the implicit shift: `e^{-b_bar alpha_i dt}` and
/// `(1 - e^{-b_bar alpha_i dt}) / (b_bar alpha_i)`.
pub(crate) fn shift_factors(alphas: &[f64], b_bar: f64, dt: f64) -> (Vec<f64>, Vec<f64>) {
    alphas
        .iter()
        .map(|&a| {
            let z = b_bar * a * dt;
            let decay = (-z).exp();
            // -expm1 keeps full precision for small z
            (decay, dt * (-(-z).exp_m1()) / z)
        })
        .unzip()
}

/// One step in `rho`: the diffusion is split as the constant shift `b_bar`,
/// integrated exactly, plus the bounded remainder `b(rho) - b_bar`, which is
/// frozen over the step together with the reaction and the control.
pub(crate) struct RhoStepper<'a> {
    pub model: &'a ModelSpec,
    pub space: Arc<SpectralSpace>,
    pub b_bar: f64,
    pub decay: Vec<f64>,
    pub phi1: Vec<f64>,
    pub rho_n: Vec<f64>,
    pub u_n: Vec<f64>,
    pub w_hat: Vec<f64>,
    pub q_n: Vec<f64>,
    pub rhs_n: Vec<f64>,
    pub rhs_hat: Vec<f64>,
    pub q_hat: Vec<f64>,
}

/// Forcing of one step: a control `phi_k`, a noise increment, or nothing.
pub(crate) enum Forcing<'a> {
    None,
    /// H-coordinates of a control; `Q phi` enters the drift.
    Control(&'a [f64]),
    /// Increments `dW_{k,i}` of the retained noise modes.
    Noise(&'a [f64]),
}

impl<'a> RhoStepper<'a> {
    pub fn new(model: &'a ModelSpec, dt: f64) -> Self {
        let space = Arc::clone(model.space());
        let b_bar = model.b_shift();
        let (decay, phi1) = shift_factors(space.eigenvalues(), b_bar, dt);
        let nq = space.quad_nodes();
        let n = space.n_modes();
        Self {
            model,
            space,
            b_bar,
            decay,
            phi1,
            rho_n: vec![0.0; nq],
            u_n: vec![0.0; nq],
            w_hat: vec![0.0; n],
            q_n: vec![0.0; nq],
            rhs_n: vec![0.0; nq],
            rhs_hat: vec![0.0; n],
            q_hat: vec![0.0; n],
        }
    }

    /// Advances `rho` (coefficients) by one step. With `without_corrector` the
    /// corrector drift is subtracted.
    pub fn step(&mut self, rho: &mut [f64], forcing: Forcing, without_corrector: bool) {
        let model = self.model;
        let space = &self.space;
        space.synthesize(rho, &mut self.rho_n);
        for (u, &r) in self.u_n.iter_mut().zip(&self.rho_n) {
            *u = model.g_inverse(r);
        }
        space.analyze(&self.u_n, &mut self.w_hat);

        self.q_hat.iter_mut().for_each(|q| *q = 0.0);
        let (control, noise) = match forcing {
            Forcing::None => (false, false),
            Forcing::Control(phi) => {
                for ((q, &p), &l) in self.q_hat.iter_mut().zip(phi).zip(model.lambdas()) {
                    *q = l * p;
                }
                (true, false)
            }
            Forcing::Noise(dw) => {
                self.q_hat[..dw.len()].copy_from_slice(dw);
                (false, true)
            }
        };
        if control || noise {
            space.synthesize(&self.q_hat, &mut self.q_n);
        }
        let nodes = space.nodes();
        let kernel = model.noise_kernel();
        for j in 0..self.rhs_n.len() {
            let (x, u) = (nodes[j], self.u_n[j]);
            let mut v = model.f_eval(x, u);
            if control {
                v += model.diffusion.s(x, u) * self.q_n[j];
            }
            if without_corrector {
                v -= model.corrector_value(x, u, kernel[j]);
            }
            self.rhs_n[j] = v;
            if noise {
                self.q_n[j] *= model.diffusion.s(x, u);
            }
        }
        space.analyze(&self.rhs_n, &mut self.rhs_hat);
        if noise {
            space.analyze(&self.q_n, &mut self.q_hat);
        } else {
            self.q_hat.iter_mut().for_each(|q| *q = 0.0);
        }
        let alphas = space.eigenvalues();
        for i in 0..rho.len() {
            let drift = -alphas[i] * (self.w_hat[i] - self.b_bar * rho[i]) + self.rhs_hat[i];
            rho[i] = self.decay[i] * (rho[i] + self.q_hat[i]) + self.phi1[i] * drift;
        }
    }
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Controlled skeleton `gamma(u) u_t = Laplacian u + f(u) + sigma(u) Q phi`, solved for
/// `rho = g(u)` on the first `n_galerkin` modes.
pub fn solve_skeleton(
    model: &ModelSpec,
    u0: &Field,
    phi: &ControlPath,
    grid: &TimeGrid,
    n_galerkin: usize,
) -> Result<RhoTrajectory> {
    check_space(model, u0, "initial datum")?;
    check_grid(grid, phi.grid(), "control")?;
    let n_modes = model.space().n_modes();
    if n_galerkin == 0 || n_galerkin > n_modes {
        return invalid(format!("n_galerkin must lie in 1..={n_modes}, got {n_galerkin}"));
    }
    if n_galerkin < n_modes {
        let space = model.space().truncated(n_galerkin)?;
        let reduced = model.on_space(&space)?;
        let u0 = u0.resample_to(&space)?;
        let steps = phi
            .steps()
            .iter()
            .map(|f| f.resample_to(&space))
            .collect::<Result<Vec<_>>>()?;
        let phi = ControlPath::from_fields(*grid, steps)?;
        return solve_skeleton(&reduced, &u0, &phi, grid, n_galerkin);
    }
    let mut rho = rho_of_u(model, u0).into_coeffs();
    let mut stepper = RhoStepper::new(model, grid.dt());
    let space = model.space();
    let mut out = Vec::with_capacity(grid.n_steps() + 1);
    out.push(Field::from_coeffs(space, rho.clone())?);
    for k in 0..grid.n_steps() {
        let c = phi.at_step(k).coeffs();
        let forcing = if c.iter().any(|&v| v != 0.0) {
            Forcing::Control(c)
        } else {
            Forcing::None
        };
        stepper.step(&mut rho, forcing, false);
        if !finite(&rho) {
            return Err(Error::BlowUp { step: k + 1 });
        }
        out.push(Field::from_coeffs(space, rho.clone())?);
    }
    RhoTrajectory::new(*grid, 1, out, false)
}

/// Stochastic limit equation driven by the increments `xi`, returned in the
/// variable `rho` for every variant.
pub fn solve_limit_spde(
    model: &ModelSpec,
    u0: &Field,
    xi: &NoiseIncrements,
    grid: &TimeGrid,
    variant: LimitVariant,
) -> Result<RhoTrajectory> {
    solve_limit_spde_strided(model, u0, xi, grid, variant, 1)
}

/// [`solve_limit_spde`] keeping every `stride`-th state.
pub fn solve_limit_spde_strided(
    model: &ModelSpec,
    u0: &Field,
    xi: &NoiseIncrements,
    grid: &TimeGrid,
    variant: LimitVariant,
    stride: usize,
) -> Result<RhoTrajectory> {
    check_space(model, u0, "initial datum")?;
    check_grid(grid, xi.grid(), "noise")?;
    if xi.n_noise() > model.space().n_modes() {
        return invalid("noise has more modes than the space");
    }
    if stride == 0 || grid.n_steps() % stride != 0 {
        return invalid(format!("stride {stride} does not divide {} steps", grid.n_steps()));
    }
    let space = model.space();
    let mut out = Vec::with_capacity(grid.n_steps() / stride + 1);
    match variant {
        LimitVariant::RhoForm | LimitVariant::RhoFormWithoutCorrector => {
            let without = variant == LimitVariant::RhoFormWithoutCorrector;
            let mut rho = rho_of_u(model, u0).into_coeffs();
            let mut stepper = RhoStepper::new(model, grid.dt());
            out.push(Field::from_coeffs(space, rho.clone())?);
            for k in 0..grid.n_steps() {
                stepper.step(&mut rho, Forcing::Noise(xi.step(k)), without);
                if !finite(&rho) {
                    return Err(Error::BlowUp { step: k + 1 });
                }
                if (k + 1) % stride == 0 {
                    out.push(Field::from_coeffs(space, rho.clone())?);
                }
            }
        }
        LimitVariant::UFormWithCorrector => {
            let mut u = u0.coeffs().to_vec();
            let mut stepper = UStepper::new(model, grid.dt());
            out.push(rho_of_u(model, u0));
            for k in 0..grid.n_steps() {
                stepper.step(&mut u, xi.step(k));
                if !finite(&u) {
                    return Err(Error::BlowUp { step: k + 1 });
                }
                if (k + 1) % stride == 0 {
                    out.push(rho_of_u(model, &Field::from_coeffs(space, u.clone())?));
                }
            }
        }
    }
    RhoTrajectory::new(*grid, stride, out, true)
}

/// Exponential Euler-Maruyama step of
/// `du = [Laplacian u + f + corrector]/gamma(u) dt + sigma(u)/gamma(u) dW` with the same
/// implicit shift as in the `rho` variable.
struct UStepper<'a> {
    model: &'a ModelSpec,
    b_bar: f64,
    decay: Vec<f64>,
    phi1: Vec<f64>,
    u_n: Vec<f64>,
    lap_hat: Vec<f64>,
    lap_n: Vec<f64>,
    q_hat: Vec<f64>,
    q_n: Vec<f64>,
    rhs_n: Vec<f64>,
    rhs_hat: Vec<f64>,
}

impl<'a> UStepper<'a> {
    fn new(model: &'a ModelSpec, dt: f64) -> Self {
        let space = model.space();
        let b_bar = model.b_shift();
        let (n, nq) = (space.n_modes(), space.quad_nodes());
        let (decay, phi1) = shift_factors(space.eigenvalues(), b_bar, dt);
        Self {
            model,
            b_bar,
            decay,
            phi1,
            u_n: vec![0.0; nq],
            lap_hat: vec![0.0; n],
            lap_n: vec![0.0; nq],
            q_hat: vec![0.0; n],
            q_n: vec![0.0; nq],
            rhs_n: vec![0.0; nq],
            rhs_hat: vec![0.0; n],
        }
    }

    fn step(&mut self, u: &mut [f64], dw: &[f64]) {
        let model = self.model;
        let space = model.space();
        let alphas = space.eigenvalues();
        space.synthesize(u, &mut self.u_n);
        for i in 0..u.len() {
            self.lap_hat[i] = -alphas[i] * u[i];
        }
        space.synthesize(&self.lap_hat, &mut self.lap_n);
        self.q_hat.iter_mut().for_each(|q| *q = 0.0);
        self.q_hat[..dw.len()].copy_from_slice(dw);
        space.synthesize(&self.q_hat, &mut self.q_n);
        let nodes = space.nodes();
        let kernel = model.noise_kernel();
        for j in 0..self.rhs_n.len() {
            let (x, v) = (nodes[j], self.u_n[j]);
            let gamma = model.friction.gamma(v);
            let drift = self.lap_n[j] + model.f_eval(x, v) + model.corrector_value(x, v, kernel[j]);
            self.rhs_n[j] = drift / gamma;
            self.q_n[j] *= model.diffusion.s(x, v) / gamma;
        }
        space.analyze(&self.rhs_n, &mut self.rhs_hat);
        space.analyze(&self.q_n, &mut self.q_hat);
        for i in 0..u.len() {
            // the implicit shift is taken back out of the frozen drift
            let drift = self.rhs_hat[i] - self.b_bar * self.lap_hat[i];
            u[i] = self.decay[i] * (u[i] + self.q_hat[i]) + self.phi1[i] * drift;
        }
    }
}

/// Maximal weak-form residual against the first `n_test` eigenfunctions,
/// with time integrals by the trapezoid rule over the snapshots.
pub fn residual_check_with(
    traj: &RhoTrajectory,
    model: &ModelSpec,
    phi: Option<&ControlPath>,
    n_test: usize,
) -> Result<f64> {
    if traj.is_stochastic() {
        return invalid("the weak-form residual is not defined pathwise for noise-driven trajectories");
    }
    let first = &traj.snapshots()[0];
    check_space(model, first, "trajectory")?;
    if let Some(phi) = phi {
        check_grid(traj.grid(), phi.grid(), "control")?;
    }
    let space = model.space();
    let n_test = n_test.min(space.n_modes());
    let h = space.spacing();
    let nodes = space.nodes();

    // test-function gradients on the closed grid
    let test_grads: Vec<Vec<f64>> = (1..=n_test)
        .map(|j| {
            let mut e = vec![0.0; space.n_modes()];
            e[j - 1] = 1.0;
            space.gradient_closed(&e)
        })
        .collect();
    let closed_weight = |m: usize, len: usize| if m == 0 || m + 1 == len { 0.5 * h } else { h };

    // pointwise-in-time integrand <S(rho(t)), psi_j> for every test function
    let integrand = |rho: &Field, control: Option<&Field>| -> Vec<f64> {
        let mut closed_rho = vec![0.0];
        closed_rho.extend(rho.nodal());
        closed_rho.push(0.0);
        let grad = space.gradient_closed(rho.coeffs());
        let flux: Vec<f64> = closed_rho
            .iter()
            .zip(&grad)
            .map(|(&r, &d)| model.b_eval(r) * d)
            .collect();
        let u_n: Vec<f64> = closed_rho[1..closed_rho.len() - 1]
            .iter()
            .map(|&r| model.g_inverse(r))
            .collect();
        let qphi: Option<Vec<f64>> = control.map(|c| {
            let q: Vec<f64> = c
                .coeffs()
                .iter()
                .enumerate()
                .map(|(i, v)| if i < model.n_noise() { v * model.lambdas()[i] } else { 0.0 })
                .collect();
            space.synthesize_vec(&q)
        });
        let source: Vec<f64> = (0..u_n.len())
            .map(|m| {
                let mut v = model.f_eval(nodes[m], u_n[m]);
                if let Some(q) = &qphi {
                    v += model.diffusion.s(nodes[m], u_n[m]) * q[m];
                }
                v
            })
            .collect();
        (1..=n_test)
            .map(|j| {
                let len = flux.len();
                let diff: f64 = flux
                    .iter()
                    .zip(&test_grads[j - 1])
                    .enumerate()
                    .map(|(m, (a, b))| closed_weight(m, len) * a * b)
                    .sum();
                let src: f64 = h * source
                    .iter()
                    .zip(space.basis_row(j))
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
                src - diff
            })
            .collect()
    };

    let snaps = traj.snapshots();
    let dt_snap = traj.grid().dt() * traj.stride() as f64;
    let n_steps = traj.grid().n_steps();
    let control_at = |j: usize| -> Option<&Field> {
        phi.map(|p| {
            let k = (j * traj.stride()).min(n_steps - 1);
            p.at_step(k)
        })
    };
    let mut prev = integrand(&snaps[0], control_at(0));
    let mut acc = vec![0.0; n_test];
    let mut worst = 0.0_f64;
    for j in 1..snaps.len() {
        let cur = integrand(&snaps[j], control_at(j));
        for t in 0..n_test {
            acc[t] += 0.5 * dt_snap * (prev[t] + cur[t]);
            let change = snaps[j].coeffs()[t] - snaps[0].coeffs()[t];
            worst = worst.max((change - acc[t]).abs());
        }
        prev = cur;
    }
    Ok(worst)
}

/// [`residual_check_with`] against the first eight eigenfunctions.
pub fn residual_check(traj: &RhoTrajectory, model: &ModelSpec, phi: Option<&ControlPath>) -> Result<f64> {
    residual_check_with(traj, model, phi, 8)
}
