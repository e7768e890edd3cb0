//! Dirichlet sine spectral space on `[0, L]`.
//!
//! Fields are stored as coefficients in the orthonormal eigenbasis
//! `e_i(x) = sqrt(2/L) sin(i pi x / L)` of the Dirichlet Laplacian, with
//! eigenvalues `alpha_i = (i pi / L)^2` (so `Delta e_i = -alpha_i e_i`).
//! Nodal values live on the uniform interior grid `x_j = j L / (N + 1)`,
//! `j = 1..=N`, where the discrete sine transform is exact for every mode up
//! to `N`. Boundary values are zero by construction.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSpace {
    length: f64,
    n_modes: usize,
    quad_nodes: usize,
    eigenvalues: Vec<f64>,
    nodes: Vec<f64>,
    // row i holds e_{i+1} sampled at the interior nodes
    basis: Vec<f64>,
    spacing: f64,
}

impl SpectralSpace {
    /// Builds the space with `n_modes` eigenfunctions and `quad_nodes` interior nodes.
    pub fn new(length: f64, n_modes: usize, quad_nodes: usize) -> Result<Arc<Self>> {
        if !(length > 0.0) || !length.is_finite() {
            return invalid(format!("domain length must be positive, got {length}"));
        }
        if n_modes == 0 {
            return invalid("n_modes must be at least 1");
        }
        if quad_nodes < n_modes {
            return invalid(format!(
                "quad_nodes ({quad_nodes}) must be at least n_modes ({n_modes})"
            ));
        }
        let spacing = length / (quad_nodes + 1) as f64;
        let nodes: Vec<f64> = (1..=quad_nodes).map(|j| j as f64 * spacing).collect();
        let eigenvalues = (1..=n_modes)
            .map(|i| (i as f64 * PI / length).powi(2))
            .collect();
        let amp = (2.0 / length).sqrt();
        let mut basis = Vec::with_capacity(n_modes * quad_nodes);
        for i in 1..=n_modes {
            for j in 1..=quad_nodes {
                // exact integer phase keeps the discrete orthogonality tight
                let phase = ((i * j) % (2 * (quad_nodes + 1))) as f64 * PI / (quad_nodes + 1) as f64;
                basis.push(amp * phase.sin());
            }
        }
        Ok(Arc::new(Self {
            length,
            n_modes,
            quad_nodes,
            eigenvalues,
            nodes,
            basis,
            spacing,
        }))
    }

    /// Space with the default quadrature resolution of `4 * n_modes` nodes.
    pub fn with_default_quadrature(length: f64, n_modes: usize) -> Result<Arc<Self>> {
        Self::new(length, n_modes, 4 * n_modes)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn quad_nodes(&self) -> usize {
        self.quad_nodes
    }

    /// `alpha_i` for `i = 1..=n_modes`, stored at index `i - 1`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.n_modes - 1]
    }

    /// Interior quadrature nodes.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Node spacing `h = L / (N + 1)`, which is also the quadrature weight.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `e_i` sampled on the interior nodes (`i` is 1-based).
    pub fn basis_row(&self, i: usize) -> &[f64] {
        let r = i - 1;
        &self.basis[r * self.quad_nodes..(r + 1) * self.quad_nodes]
    }

    /// Pointwise evaluation of `e_i(x)` (`i` is 1-based).
    pub fn eigenfunction(&self, i: usize, x: f64) -> f64 {
        (2.0 / self.length).sqrt() * (i as f64 * PI * x / self.length).sin()
    }

    /// Nodal values of the coefficient vector `coeffs` (may be shorter than `n_modes`).
    pub fn synthesize(&self, coeffs: &[f64], out: &mut [f64]) {
        debug_assert!(coeffs.len() <= self.n_modes);
        debug_assert_eq!(out.len(), self.quad_nodes);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = &self.basis[i * self.quad_nodes..(i + 1) * self.quad_nodes];
            for (o, &b) in out.iter_mut().zip(row) {
                *o += c * b;
            }
        }
    }

    /// Sine coefficients of nodal data, truncated to `out.len()` modes.
    pub fn analyze(&self, nodal: &[f64], out: &mut [f64]) {
        debug_assert_eq!(nodal.len(), self.quad_nodes);
        debug_assert!(out.len() <= self.n_modes);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.basis[i * self.quad_nodes..(i + 1) * self.quad_nodes];
            let dot: f64 = row.iter().zip(nodal).map(|(b, v)| b * v).sum();
            *o = self.spacing * dot;
        }
    }

    pub fn synthesize_vec(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.quad_nodes];
        self.synthesize(coeffs, &mut out);
        out
    }

    pub fn analyze_vec(&self, nodal: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_modes];
        self.analyze(nodal, &mut out);
        out
    }

    /// Nodal → spectral transform.
    pub fn to_spectral(self: &Arc<Self>, nodal: &[f64]) -> Result<Field> {
        if nodal.len() != self.quad_nodes {
            return invalid(format!(
                "expected {} nodal values, got {}",
                self.quad_nodes,
                nodal.len()
            ));
        }
        Ok(Field {
            space: Arc::clone(self),
            coeffs: self.analyze_vec(nodal),
        })
    }

    /// Spectral → nodal transform.
    pub fn to_nodal(&self, field: &Field) -> Result<Vec<f64>> {
        if field.space.length != self.length || field.coeffs.len() != self.n_modes {
            return invalid("field does not belong to this space");
        }
        Ok(self.synthesize_vec(&field.coeffs))
    }

    /// Discrete Gram matrix `h * sum_j e_i(x_j) e_k(x_j)`, row-major.
    pub fn gram_matrix(&self) -> Vec<f64> {
        let n = self.n_modes;
        let mut g = vec![0.0; n * n];
        for i in 1..=n {
            for k in 1..=n {
                let dot: f64 = self
                    .basis_row(i)
                    .iter()
                    .zip(self.basis_row(k))
                    .map(|(a, b)| a * b)
                    .sum();
                g[(i - 1) * n + (k - 1)] = self.spacing * dot;
            }
        }
        g
    }

    /// Nodes of the closed grid `x_j = j h`, `j = 0..=N+1`, boundary included.
    pub fn closed_nodes(&self) -> Vec<f64> {
        (0..=self.quad_nodes + 1)
            .map(|j| j as f64 * self.spacing)
            .collect()
    }

    /// Values of `d/dx` of the field on the closed grid.
    pub fn gradient_closed(&self, coeffs: &[f64]) -> Vec<f64> {
        let amp = (2.0 / self.length).sqrt();
        let m = self.quad_nodes + 1;
        (0..=m)
            .map(|j| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| {
                        let k = (i + 1) as f64;
                        let phase = (((i + 1) * j) % (2 * m)) as f64 * PI / m as f64;
                        c * amp * (k * PI / self.length) * phase.cos()
                    })
                    .sum()
            })
            .collect()
    }

    /// Galerkin subspace with the first `n` modes and default quadrature.
    pub fn truncated(&self, n: usize) -> Result<Arc<Self>> {
        if n == 0 || n > self.n_modes {
            return invalid(format!(
                "Galerkin truncation {n} must lie in 1..={}",
                self.n_modes
            ));
        }
        Self::with_default_quadrature(self.length, n)
    }

    pub(crate) fn sobolev_norm_coeffs(&self, coeffs: &[f64], s: f64) -> f64 {
        coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, a)| a.powf(s) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    pub(crate) fn lp_norm_nodal(&self, nodal: &[f64], p: f64) -> f64 {
        let sum: f64 = nodal.iter().map(|v| v.abs().powf(p)).sum();
        (self.spacing * sum).powf(1.0 / p)
    }
}

/// An element of `H` (or `H^1`) stored by its sine coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    space: Arc<SpectralSpace>,
    coeffs: Vec<f64>,
}

impl Field {
    pub fn zeros(space: &Arc<SpectralSpace>) -> Self {
        Self {
            space: Arc::clone(space),
            coeffs: vec![0.0; space.n_modes],
        }
    }

    pub fn from_coeffs(space: &Arc<SpectralSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.n_modes {
            return invalid(format!(
                "expected {} coefficients, got {}",
                space.n_modes,
                coeffs.len()
            ));
        }
        Ok(Self {
            space: Arc::clone(space),
            coeffs,
        })
    }

    /// The eigenfunction `e_i` (1-based).
    pub fn mode(space: &Arc<SpectralSpace>, i: usize) -> Result<Self> {
        if i == 0 || i > space.n_modes {
            return invalid(format!("mode index {i} outside 1..={}", space.n_modes));
        }
        let mut f = Self::zeros(space);
        f.coeffs[i - 1] = 1.0;
        Ok(f)
    }

    /// Samples `func` on the nodes and projects onto the retained modes.
    pub fn from_fn(space: &Arc<SpectralSpace>, func: impl Fn(f64) -> f64) -> Self {
        let nodal: Vec<f64> = space.nodes.iter().map(|&x| func(x)).collect();
        Self {
            space: Arc::clone(space),
            coeffs: space.analyze_vec(&nodal),
        }
    }

    pub fn space(&self) -> &Arc<SpectralSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn nodal(&self) -> Vec<f64> {
        self.space.synthesize_vec(&self.coeffs)
    }

    /// Point evaluation by summing the series.
    pub fn value_at(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * self.space.eigenfunction(i + 1, x))
            .sum()
    }

    /// `(sum_i alpha_i^s u_i^2)^(1/2)`; `s = 0` is the `H` norm, `s = 1` the `H^1` norm.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.space.sobolev_norm_coeffs(&self.coeffs, s)
    }

    /// Composite-quadrature `L^p` norm on the nodal grid.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return invalid(format!("L^p exponent must be >= 1, got {p}"));
        }
        if p.is_infinite() {
            return Ok(self.nodal().iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        }
        Ok(self.space.lp_norm_nodal(&self.nodal(), p))
    }

    pub fn inner(&self, other: &Field) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }

    /// Zero-pads or truncates the coefficients onto another space of the same length.
    pub fn resample_to(&self, space: &Arc<SpectralSpace>) -> Result<Field> {
        if (space.length - self.space.length).abs() > 1e-14 * self.space.length {
            return invalid("cannot resample between domains of different length");
        }
        let mut coeffs = vec![0.0; space.n_modes];
        for (c, &v) in coeffs.iter_mut().zip(&self.coeffs) {
            *c = v;
        }
        Ok(Field {
            space: Arc::clone(space),
            coeffs,
        })
    }

    fn zip_with(&self, other: &Field, op: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!(
            self.coeffs.len(),
            other.coeffs.len(),
            "fields live on different spaces"
        );
        Field {
            space: Arc::clone(&self.space),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        }
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<&Field> for f64 {
    type Output = Field;
    fn mul(self, rhs: &Field) -> Field {
        Field {
            space: Arc::clone(&rhs.space),
            coeffs: rhs.coeffs.iter().map(|c| self * c).collect(),
        }
    }
}

/// Uniform time grid on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return invalid(format!("time horizon must be positive, got {horizon}"));
        }
        if n_steps == 0 {
            return invalid("n_steps must be at least 1");
        }
        Ok(Self { horizon, n_steps })
    }

    /// Smallest grid on `[0, T]` whose step does not exceed `max_dt`.
    pub fn with_max_step(horizon: f64, max_dt: f64) -> Result<Self> {
        if !(max_dt > 0.0) {
            return invalid("max_dt must be positive");
        }
        let n = (horizon / max_dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Self::new(horizon, n)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }

    /// Grid with every `factor` steps merged.
    pub fn coarsened(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.n_steps % factor != 0 {
            return invalid(format!(
                "coarsening factor {factor} does not divide {} steps",
                self.n_steps
            ));
        }
        Self::new(self.horizon, self.n_steps / factor)
    }
}

/// Space-time norm `L^p(0, T; H^s)`; `time_exponent = inf` gives `C([0, T]; H^s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BochnerSpec {
    pub time_exponent: f64,
    pub sobolev_index: f64,
}

impl BochnerSpec {
    pub fn new(time_exponent: f64, sobolev_index: f64) -> Result<Self> {
        if !(time_exponent >= 1.0) {
            return invalid(format!(
                "time integrability exponent must be >= 1, got {time_exponent}"
            ));
        }
        if !(-1.0..=1.0).contains(&sobolev_index) {
            return invalid(format!(
                "Sobolev index must lie in [-1, 1], got {sobolev_index}"
            ));
        }
        Ok(Self {
            time_exponent,
            sobolev_index,
        })
    }

    pub fn sup_h() -> Self {
        Self {
            time_exponent: f64::INFINITY,
            sobolev_index: 0.0,
        }
    }
}

fn check_traj(traj: &[Field], grid: &TimeGrid) -> Result<()> {
    if traj.len() != grid.n_steps + 1 {
        return invalid(format!(
            "trajectory has {} snapshots but the grid needs {}",
            traj.len(),
            grid.n_steps + 1
        ));
    }
    Ok(())
}

fn trapezoid(values: &[f64], dt: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..n - 1].iter().sum();
    dt * (inner + 0.5 * (values[0] + values[n - 1]))
}

/// Time-quadrature of `sobolev_norm` over a trajectory sampled on `grid`.
pub fn bochner_norm(traj: &[Field], grid: &TimeGrid, spec: &BochnerSpec) -> Result<f64> {
    check_traj(traj, grid)?;
    let pointwise: Vec<f64> = traj
        .iter()
        .map(|f| f.sobolev_norm(spec.sobolev_index))
        .collect();
    Ok(bochner_from_pointwise(&pointwise, grid.dt(), spec.time_exponent))
}

/// Same as [`bochner_norm`] but on precomputed per-snapshot norms.
pub fn bochner_from_pointwise(norms: &[f64], dt: f64, time_exponent: f64) -> f64 {
    if time_exponent.is_infinite() {
        return norms.iter().fold(0.0_f64, |m, &v| m.max(v));
    }
    let powered: Vec<f64> = norms.iter().map(|v| v.powf(time_exponent)).collect();
    trapezoid(&powered, dt).powf(1.0 / time_exponent)
}

/// Fractional time-regularity seminorm `[u]_{W^{lambda,r}(0,T;H^s)}^{1/r}`.
///
/// The double integral `int int |u(t)-u(s)|^r / |t-s|^(1+lambda r)` is evaluated
/// by the product trapezoid rule with the diagonal cells `|t - s| < dt`
/// dropped, so the value is a lower-bound estimate of the continuum seminorm.
pub fn w_lambda_r_seminorm(
    traj: &[Field],
    grid: &TimeGrid,
    lambda: f64,
    r: f64,
    sobolev_index: f64,
) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return invalid(format!("lambda must lie in (0, 1), got {lambda}"));
    }
    if !(r > 1.0) || !r.is_finite() {
        return invalid(format!("r must exceed 1, got {r}"));
    }
    if !(-1.0..=1.0).contains(&sobolev_index) {
        return invalid("Sobolev index must lie in [-1, 1]");
    }
    check_traj(traj, grid)?;
    let space = traj[0].space();
    let n = traj.len();
    let dt = grid.dt();
    let weight = |k: usize| if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
    let exponent = 1.0 + lambda * r;
    let mut diff = vec![0.0; space.n_modes()];
    let mut total = 0.0;
    for k in 0..n {
        for l in (k + 1)..n {
            for ((d, a), b) in diff
                .iter_mut()
                .zip(traj[k].coeffs())
                .zip(traj[l].coeffs())
            {
                *d = a - b;
            }
            let norm = space.sobolev_norm_coeffs(&diff, sobolev_index);
            let gap = (l - k) as f64 * dt;
            total += weight(k) * weight(l) * norm.powf(r) / gap.powf(exponent);
        }
    }
    // symmetric double sum
    let integral = 2.0 * total * dt * dt;
    Ok(integral.powf(1.0 / r))
}
