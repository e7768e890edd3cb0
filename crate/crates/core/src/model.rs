//! Coefficient families: friction `gamma`, its primitive `g`, the reaction `f`,
//! and the diagonal multiplicative noise `sigma(u) Q`.
//!
//! Every family is closed-form so that the structural constants (`gamma_0`,
//! `gamma_1`, Lipschitz constants, the primitive of `f`) are exact rather than
//! estimated.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::spectral::{Field, SpectralSpace};

const G_INVERSE_TOL: f64 = 1e-12;
const G_INVERSE_MAX_ITER: usize = 100;

/// State-dependent friction coefficient `gamma(r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FrictionSpec {
    /// `gamma(r) = gamma`.
    Constant { gamma: f64 },
    /// `gamma(r) = base + amplitude * sin(r)`.
    Sinusoidal { base: f64, amplitude: f64 },
    /// `gamma(r) = c0 + c1 / (1 + r^2)`.
    Rational { c0: f64, c1: f64 },
}

impl FrictionSpec {
    pub fn gamma(&self, r: f64) -> f64 {
        match *self {
            Self::Constant { gamma } => gamma,
            Self::Sinusoidal { base, amplitude } => base + amplitude * r.sin(),
            Self::Rational { c0, c1 } => c0 + c1 / (1.0 + r * r),
        }
    }

    pub fn dgamma(&self, r: f64) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            Self::Sinusoidal { amplitude, .. } => amplitude * r.cos(),
            Self::Rational { c1, .. } => {
                let d = 1.0 + r * r;
                -2.0 * c1 * r / (d * d)
            }
        }
    }

    /// Exact infimum `gamma_0` over the real line.
    pub fn lower(&self) -> f64 {
        match *self {
            Self::Constant { gamma } => gamma,
            Self::Sinusoidal { base, amplitude } => base - amplitude.abs(),
            Self::Rational { c0, c1 } => c0.min(c0 + c1),
        }
    }

    /// Exact supremum `gamma_1` over the real line.
    pub fn upper(&self) -> f64 {
        match *self {
            Self::Constant { gamma } => gamma,
            Self::Sinusoidal { base, amplitude } => base + amplitude.abs(),
            Self::Rational { c0, c1 } => c0.max(c0 + c1),
        }
    }

    /// `sup |gamma'|`.
    pub fn derivative_bound(&self) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            Self::Sinusoidal { amplitude, .. } => amplitude.abs(),
            // max of 2 r / (1 + r^2)^2 is attained at r = 1/sqrt(3)
            Self::Rational { c1, .. } => 3.0 * 3f64.sqrt() / 8.0 * c1.abs(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            Self::Constant { .. } => true,
            Self::Sinusoidal { amplitude, .. } => amplitude == 0.0,
            Self::Rational { c1, .. } => c1 == 0.0,
        }
    }

    /// `g(r) = int_0^r gamma`.
    pub fn g(&self, r: f64) -> f64 {
        match *self {
            Self::Constant { gamma } => gamma * r,
            Self::Sinusoidal { base, amplitude } => base * r + amplitude * (1.0 - r.cos()),
            Self::Rational { c0, c1 } => c0 * r + c1 * r.atan(),
        }
    }

    /// Inverse of `g` by safeguarded Newton on the bracket `[y/gamma_1, y/gamma_0]`.
    ///
    /// Returns NaN when `gamma_0 <= 0`, where `g` need not be invertible.
    pub fn g_inverse(&self, y: f64) -> f64 {
        let (lo_gamma, hi_gamma) = (self.lower(), self.upper());
        if !(lo_gamma > 0.0) {
            return f64::NAN;
        }
        if let Self::Constant { gamma } = *self {
            return y / gamma;
        }
        if y == 0.0 {
            return 0.0;
        }
        let (mut lo, mut hi) = if y > 0.0 {
            (y / hi_gamma, y / lo_gamma)
        } else {
            (y / lo_gamma, y / hi_gamma)
        };
        let scale = y.abs().max(1.0);
        let mut x = y / self.gamma(0.0).clamp(lo_gamma, hi_gamma);
        x = x.clamp(lo, hi);
        for _ in 0..G_INVERSE_MAX_ITER {
            let residual = self.g(x) - y;
            if residual.abs() <= G_INVERSE_TOL * scale {
                return x;
            }
            if residual > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let newton = x - residual / self.gamma(x);
            x = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= f64::EPSILON * scale {
                return x;
            }
        }
        x
    }

    /// `b(y) = 1 / gamma(g^{-1}(y))`.
    pub fn b(&self, y: f64) -> f64 {
        1.0 / self.gamma(self.g_inverse(y))
    }
}

/// Reaction term `f(x, r)`; every family here is independent of `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReactionSpec {
    /// `f(r) = -c r + h`.
    Lipschitz {
        c: f64,
        #[serde(default)]
        h: f64,
    },
    /// `f(r) = -a |r|^(theta - 1) r`.
    KleinGordon { a: f64, theta: f64 },
}

impl ReactionSpec {
    pub fn f(&self, _x: f64, r: f64) -> f64 {
        match *self {
            Self::Lipschitz { c, h } => -c * r + h,
            Self::KleinGordon { a, theta } => -a * r.abs().powf(theta - 1.0) * r,
        }
    }

    /// `d f / d r`.
    pub fn df(&self, _x: f64, r: f64) -> f64 {
        match *self {
            Self::Lipschitz { c, .. } => -c,
            Self::KleinGordon { a, theta } => -a * theta * r.abs().powf(theta - 1.0),
        }
    }

    /// Primitive `int_0^r f(x, s) ds`.
    pub fn antiderivative(&self, _x: f64, r: f64) -> f64 {
        match *self {
            Self::Lipschitz { c, h } => -0.5 * c * r * r + h * r,
            Self::KleinGordon { a, theta } => -a * r.abs().powf(theta + 1.0) / (theta + 1.0),
        }
    }

    /// Linear extension of `f` outside `[-n, n]`.
    pub fn f_truncated(&self, n: f64, x: f64, r: f64) -> f64 {
        if r > n {
            self.f(x, n) + (r - n) * self.df(x, n)
        } else if r < -n {
            self.f(x, -n) + (r + n) * self.df(x, -n)
        } else {
            self.f(x, r)
        }
    }

    pub fn df_truncated(&self, n: f64, x: f64, r: f64) -> f64 {
        self.df(x, r.clamp(-n, n))
    }

    /// Polynomial growth exponent; the Lipschitz family grows linearly.
    pub fn theta(&self) -> f64 {
        match *self {
            Self::Lipschitz { .. } => 1.0,
            Self::KleinGordon { theta, .. } => theta,
        }
    }

    pub fn is_klein_gordon(&self) -> bool {
        matches!(self, Self::KleinGordon { .. })
    }

    /// Growth constant with `|f| <= c1 (1 + |r|^theta)` and `|f'| <= c1 (1 + |r|^(theta-1))`.
    pub fn c1(&self) -> f64 {
        match *self {
            Self::Lipschitz { c, h } => c.abs().max(h.abs()),
            Self::KleinGordon { a, theta } => a.abs() * theta.max(1.0),
        }
    }

    /// Largest `c2` with `int_0^r f <= c2 (1 - |r|^(theta+1))` for the Klein-Gordon
    /// family; `c / 4` for the Lipschitz family.
    pub fn c2(&self) -> f64 {
        match *self {
            Self::Lipschitz { c, .. } => 0.25 * c.abs(),
            Self::KleinGordon { a, theta } => a.abs() / (theta + 1.0),
        }
    }

    /// Global Lipschitz constant in `r`, if one exists.
    pub fn lipschitz_constant(&self) -> Option<f64> {
        match *self {
            Self::Lipschitz { c, .. } => Some(c.abs()),
            Self::KleinGordon { theta, .. } if theta == 1.0 => Some(self.c1()),
            Self::KleinGordon { .. } => None,
        }
    }

    /// Lipschitz constant of the truncation at level `n`.
    pub fn truncated_lipschitz_constant(&self, n: f64) -> f64 {
        match *self {
            Self::Lipschitz { c, .. } => c.abs(),
            Self::KleinGordon { a, theta } => a.abs() * theta * n.powf(theta - 1.0),
        }
    }
}

/// Space-independent multiplier `s(x, y)` of the diagonal noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Multiplier {
    Constant { value: f64 },
    /// `offset + slope * y`, optionally clamped from below at `floor`.
    Affine {
        offset: f64,
        slope: f64,
        #[serde(default)]
        floor: Option<f64>,
    },
}

/// Eigenvalues `lambda_i` of `Q` in the sine basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpectrum {
    /// `lambda_i = lambda0 * i^(-decay)`.
    Power { lambda0: f64, decay: f64 },
    Explicit { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSpec {
    pub multiplier: Multiplier,
    pub spectrum: NoiseSpectrum,
    /// Number of retained noise modes; modes beyond it carry no noise.
    pub n_noise: usize,
}

impl DiffusionSpec {
    pub fn s(&self, _x: f64, y: f64) -> f64 {
        match self.multiplier {
            Multiplier::Constant { value } => value,
            Multiplier::Affine {
                offset,
                slope,
                floor,
            } => {
                let v = offset + slope * y;
                match floor {
                    Some(fl) => v.max(fl),
                    None => v,
                }
            }
        }
    }

    pub fn ds(&self, _x: f64, y: f64) -> f64 {
        match self.multiplier {
            Multiplier::Constant { .. } => 0.0,
            Multiplier::Affine {
                offset,
                slope,
                floor,
            } => match floor {
                Some(fl) if offset + slope * y < fl => 0.0,
                _ => slope,
            },
        }
    }

    /// Lipschitz constant of `y -> s(x, y)`.
    pub fn multiplier_lipschitz(&self) -> f64 {
        match self.multiplier {
            Multiplier::Constant { .. } => 0.0,
            Multiplier::Affine { slope, .. } => slope.abs(),
        }
    }

    /// `lambda_i` for 1-based `i`; zero beyond `n_noise`.
    pub fn lambda(&self, i: usize) -> f64 {
        if i == 0 || i > self.n_noise {
            return 0.0;
        }
        match &self.spectrum {
            NoiseSpectrum::Power { lambda0, decay } => lambda0 * (i as f64).powf(-decay),
            NoiseSpectrum::Explicit { values } => values.get(i - 1).copied().unwrap_or(0.0),
        }
    }

    pub fn lambdas(&self) -> Vec<f64> {
        (1..=self.n_noise).map(|i| self.lambda(i)).collect()
    }

    pub fn sum_lambda_sq(&self) -> f64 {
        self.lambdas().iter().map(|l| l * l).sum()
    }

    /// Constant in `sup_x sum_i |sigma_i(x,y1) - sigma_i(x,y2)|^2 <= L |y1 - y2|^2`.
    pub fn lipschitz_l(&self, length: f64) -> f64 {
        self.multiplier_lipschitz().powi(2) * 2.0 / length * self.sum_lambda_sq()
    }

    /// `sigma_0 = (sup_x sum_i sigma_i(x, 0)^2)^(1/2)`, bounded via `|e_i|_inf^2 = 2/L`.
    pub fn sigma0(&self, length: f64) -> f64 {
        (self.s(0.0, 0.0).powi(2) * 2.0 / length * self.sum_lambda_sq()).sqrt()
    }

    /// Whether `sigma(u) Q` is injective on the retained noise modes.
    pub fn is_invertible(&self) -> bool {
        let multiplier_ok = match self.multiplier {
            Multiplier::Constant { value } => value != 0.0,
            Multiplier::Affine {
                offset,
                slope,
                floor,
            } => match floor {
                Some(fl) => fl > 0.0,
                None => slope == 0.0 && offset != 0.0,
            },
        };
        multiplier_ok && self.n_noise > 0 && self.lambdas().iter().all(|&l| l > 0.0)
    }

    /// Whether the full (untruncated) family satisfies `sum_i lambda_i^2 |e_i|_inf^2 < inf`,
    /// with the tail `sum_{i > n} 2 lambda_i^2 / L` bounded by the integral test.
    pub fn summability(&self, length: f64) -> (bool, f64) {
        match self.spectrum {
            NoiseSpectrum::Power { lambda0, decay } => {
                if lambda0 == 0.0 {
                    return (true, 0.0);
                }
                if 2.0 * decay > 1.0 {
                    let n = self.n_noise.max(1) as f64;
                    let tail = 2.0 / length * lambda0 * lambda0 * n.powf(1.0 - 2.0 * decay)
                        / (2.0 * decay - 1.0);
                    (true, tail)
                } else {
                    (false, f64::INFINITY)
                }
            }
            NoiseSpectrum::Explicit { .. } => (true, 0.0),
        }
    }
}

/// A complete model on a spectral space.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    space: Arc<SpectralSpace>,
    pub friction: FrictionSpec,
    pub reaction: ReactionSpec,
    pub diffusion: DiffusionSpec,
    lambdas: Vec<f64>,
    // sum_i lambda_i^2 e_i(x_j)^2 at the nodes
    noise_kernel: Vec<f64>,
}

impl ModelSpec {
    pub fn new(
        space: &Arc<SpectralSpace>,
        friction: FrictionSpec,
        reaction: ReactionSpec,
        diffusion: DiffusionSpec,
    ) -> Result<Self> {
        if diffusion.n_noise > space.n_modes() {
            return invalid(format!(
                "n_noise ({}) exceeds n_modes ({})",
                diffusion.n_noise,
                space.n_modes()
            ));
        }
        let lambdas = diffusion.lambdas();
        let mut noise_kernel = vec![0.0; space.quad_nodes()];
        for (i, l) in lambdas.iter().enumerate() {
            for (k, e) in noise_kernel.iter_mut().zip(space.basis_row(i + 1)) {
                *k += l * l * e * e;
            }
        }
        Ok(Self {
            space: Arc::clone(space),
            friction,
            reaction,
            diffusion,
            lambdas,
            noise_kernel,
        })
    }

    /// The same coefficients on another space (Galerkin truncation or refinement).
    /// Noise modes beyond the new space are dropped.
    pub fn on_space(&self, space: &Arc<SpectralSpace>) -> Result<Self> {
        let mut diffusion = self.diffusion.clone();
        diffusion.n_noise = diffusion.n_noise.min(space.n_modes());
        Self::new(
            space,
            self.friction.clone(),
            self.reaction.clone(),
            diffusion,
        )
    }

    pub fn space(&self) -> &Arc<SpectralSpace> {
        &self.space
    }

    /// `lambda_i` for the retained noise modes.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn n_noise(&self) -> usize {
        self.lambdas.len()
    }

    pub fn noise_kernel(&self) -> &[f64] {
        &self.noise_kernel
    }

    /// `sum_i lambda_i^2 e_i(x)^2` at an arbitrary point.
    pub fn noise_kernel_at(&self, x: f64) -> f64 {
        self.lambdas
            .iter()
            .enumerate()
            .map(|(i, l)| (l * self.space.eigenfunction(i + 1, x)).powi(2))
            .sum()
    }

    pub fn gamma0(&self) -> f64 {
        self.friction.lower()
    }

    pub fn gamma1(&self) -> f64 {
        self.friction.upper()
    }

    /// Implicit shift `(1/gamma_0 + 1/gamma_1) / 2` of the quasilinear diffusion.
    pub fn b_shift(&self) -> f64 {
        0.5 * (1.0 / self.gamma0() + 1.0 / self.gamma1())
    }

    pub fn g_eval(&self, r: f64) -> f64 {
        self.friction.g(r)
    }

    pub fn g_inverse(&self, y: f64) -> f64 {
        self.friction.g_inverse(y)
    }

    pub fn b_eval(&self, y: f64) -> f64 {
        self.friction.b(y)
    }

    pub fn f_eval(&self, x: f64, r: f64) -> f64 {
        self.reaction.f(x, r)
    }

    pub fn f_truncated(&self, n: f64, x: f64, r: f64) -> f64 {
        self.reaction.f_truncated(n, x, r)
    }

    pub fn antiderivative_eval(&self, x: f64, r: f64) -> f64 {
        self.reaction.antiderivative(x, r)
    }

    /// Pointwise corrector `-gamma'(u) s(x,u)^2 K(x) / (2 gamma(u)^2)` given the
    /// noise kernel value `K(x) = sum_i lambda_i^2 e_i(x)^2`.
    pub fn corrector_value(&self, x: f64, u: f64, kernel: f64) -> f64 {
        let gamma = self.friction.gamma(u);
        let s = self.diffusion.s(x, u);
        -self.friction.dgamma(u) * s * s * kernel / (2.0 * gamma * gamma)
    }

    /// Corrector drift of the small-mass limit, sampled at the nodes.
    pub fn corrector_drift_nodal(&self, u: &Field) -> Vec<f64> {
        let un = u.nodal();
        self.space
            .nodes()
            .iter()
            .zip(&un)
            .zip(&self.noise_kernel)
            .map(|((&x, &v), &k)| self.corrector_value(x, v, k))
            .collect()
    }

    /// Corrector drift of the small-mass limit, projected onto the space.
    pub fn corrector_drift(&self, u: &Field) -> Field {
        let nodal = self.corrector_drift_nodal(u);
        Field::from_coeffs(&self.space, self.space.analyze_vec(&nodal))
            .expect("corrector lives on the model space")
    }

    /// `sigma(u) Q k` for `k` in `H`, projected onto the space. Modes of `k`
    /// beyond `n_noise` contribute nothing.
    pub fn sigma_apply(&self, u: &Field, k: &Field) -> Field {
        let un = u.nodal();
        let qk: Vec<f64> = k
            .coeffs()
            .iter()
            .zip(&self.lambdas)
            .map(|(c, l)| c * l)
            .collect();
        let mut nodal = self.space.synthesize_vec(&qk);
        for ((v, &x), &uv) in nodal.iter_mut().zip(self.space.nodes()).zip(&un) {
            *v *= self.diffusion.s(x, uv);
        }
        Field::from_coeffs(&self.space, self.space.analyze_vec(&nodal))
            .expect("sigma output lives on the model space")
    }

    /// Hilbert-Schmidt norm of `sigma(u)` from `H_Q` into `H`.
    pub fn sigma_hs_norm(&self, u: &Field) -> f64 {
        let un = u.nodal();
        self.sigma_hs_norm_nodal(&un)
    }

    pub(crate) fn sigma_hs_norm_nodal(&self, un: &[f64]) -> f64 {
        let sum: f64 = self
            .space
            .nodes()
            .iter()
            .zip(un)
            .zip(&self.noise_kernel)
            .map(|((&x, &v), &k)| self.diffusion.s(x, v).powi(2) * k)
            .sum();
        (self.space.spacing() * sum).sqrt()
    }

    /// `sqrt(L_sigma)` of the Lipschitz bound of `sigma` in `H`.
    pub fn sigma_lipschitz(&self) -> f64 {
        self.diffusion.lipschitz_l(self.space.length()).sqrt()
    }

    /// Right side of the linear growth bound `sqrt(L) |u|_H + |O|^(1/2) sigma_0`.
    pub fn sigma_growth_bound(&self, u_h_norm: f64) -> f64 {
        let length = self.space.length();
        self.sigma_lipschitz() * u_h_norm + length.sqrt() * self.diffusion.sigma0(length)
    }
}

pub mod validate;

pub use validate::{validate_hypotheses, CheckOutcome, ValidationOptions, ValidationReport};

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sinusoidal() -> FrictionSpec {
        FrictionSpec::Sinusoidal {
            base: 2.0,
            amplitude: 1.0,
        }
    }

    fn kg(a: f64, theta: f64) -> ReactionSpec {
        ReactionSpec::KleinGordon { a, theta }
    }

    fn unit_noise() -> DiffusionSpec {
        DiffusionSpec {
            multiplier: Multiplier::Constant { value: 1.0 },
            spectrum: NoiseSpectrum::Explicit { values: vec![1.0] },
            n_noise: 1,
        }
    }

    #[test]
    fn constant_friction_primitive() {
        let fr = FrictionSpec::Constant { gamma: 2.0 };
        assert_eq!(fr.g(3.0), 6.0);
        assert_eq!(fr.g_inverse(6.0), 3.0);
        assert_eq!(fr.g(0.0), 0.0);
        assert_eq!(fr.b(123.0), 0.5);
    }

    #[test]
    fn sinusoidal_primitive_matches_quadrature() {
        // Simpson oracle for int_0^1 (2 + sin s) ds
        let n = 1000;
        let h = 1.0 / n as f64;
        let mut acc = 0.0;
        for k in 0..=n {
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * (2.0 + (k as f64 * h).sin());
        }
        let oracle = acc * h / 3.0;
        assert!((oracle - (3.0 - 1f64.cos())).abs() < 1e-12);
        assert!((sinusoidal().g(1.0) - oracle).abs() < 1e-12);
        assert!((sinusoidal().g(1.0) - 2.459698).abs() < 1e-6);
    }

    #[test]
    fn g_inverse_round_trip() {
        for fr in [
            sinusoidal(),
            FrictionSpec::Rational { c0: 1.0, c1: 2.0 },
            FrictionSpec::Constant { gamma: 0.7 },
        ] {
            for k in -200..=200 {
                let r = k as f64 * 0.05;
                let back = fr.g_inverse(fr.g(r));
                assert!((back - r).abs() < 1e-10, "{fr:?} r={r} back={back}");
                let y = r * 1.7;
                assert!((fr.g(fr.g_inverse(y)) - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn b_bounds_and_composition() {
        let fr = sinusoidal();
        for k in -100..=100 {
            let r = k as f64 * 0.1;
            assert!((fr.b(fr.g(r)) - 1.0 / fr.gamma(r)).abs() < 1e-10);
            let b = fr.b(r);
            assert!((1.0 / 3.0 - 1e-12..=1.0 + 1e-12).contains(&b));
        }
    }

    #[test]
    fn reaction_examples() {
        let f = kg(1.0, 2.0);
        assert_eq!(f.f(0.0, 2.0), -4.0);
        assert!((f.antiderivative(0.0, 2.0) + 8.0 / 3.0).abs() < 1e-14);
        assert_eq!(f.f_truncated(2.0, 0.0, 3.0), -8.0);
        assert_eq!(f.f_truncated(2.0, 0.0, -3.0), 8.0);
        for k in -20..=20 {
            let r = k as f64 * 0.1;
            assert_eq!(f.f_truncated(2.0, 0.0, r), f.f(0.0, r));
        }
        let lin = ReactionSpec::Lipschitz { c: 1.0, h: 0.0 };
        assert_eq!(lin.f(0.0, 5.0), -5.0);
    }

    #[test]
    fn sigma_hs_examples() {
        let space = SpectralSpace::with_default_quadrature(1.0, 8).unwrap();
        let m = ModelSpec::new(&space, sinusoidal(), kg(1.0, 2.0), unit_noise()).unwrap();
        let u = Field::from_fn(&space, |x| 0.3 * (2.0 * PI * x).sin());
        assert!((m.sigma_hs_norm(&u) - 1.0).abs() < 1e-12);

        let lin = DiffusionSpec {
            multiplier: Multiplier::Affine {
                offset: 0.0,
                slope: 1.0,
                floor: None,
            },
            ..unit_noise()
        };
        let m = ModelSpec::new(&space, sinusoidal(), kg(1.0, 2.0), lin).unwrap();
        let e1 = Field::mode(&space, 1).unwrap();
        // 4 int_0^1 sin^4(pi x) dx = 3/2
        assert!((m.sigma_hs_norm(&e1).powi(2) - 1.5).abs() < 1e-12);
        assert_eq!(m.sigma_hs_norm(&Field::zeros(&space)), 0.0);
    }

    #[test]
    fn corrector_examples() {
        let space = SpectralSpace::new(1.0, 4, 15).unwrap();
        let m = ModelSpec::new(&space, sinusoidal(), kg(1.0, 2.0), unit_noise()).unwrap();
        let zero = Field::zeros(&space);
        let nodal = m.corrector_drift_nodal(&zero);
        // node 8 of 15 sits at x = 1/2
        assert!((space.nodes()[7] - 0.5).abs() < 1e-15);
        assert!((nodal[7] + 0.25).abs() < 1e-12);
        assert_eq!(m.corrector_value(0.0, 0.0, m.noise_kernel_at(0.0)), 0.0);
        assert!(m.corrector_value(1.0, 0.0, m.noise_kernel_at(1.0)).abs() < 1e-15);

        let c = ModelSpec::new(
            &space,
            FrictionSpec::Constant { gamma: 2.0 },
            kg(1.0, 2.0),
            unit_noise(),
        )
        .unwrap();
        let u = Field::from_fn(&space, |x| (PI * x).sin());
        assert!(c.corrector_drift(&u).coeffs().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sigma_apply_matches_nodal_product() {
        let space = SpectralSpace::with_default_quadrature(1.0, 8).unwrap();
        let m = ModelSpec::new(&space, sinusoidal(), kg(1.0, 2.0), unit_noise()).unwrap();
        let u = Field::from_fn(&space, |x| x * (1.0 - x));
        let e1 = Field::mode(&space, 1).unwrap();
        let out = m.sigma_apply(&u, &e1);
        // s = 1, lambda_1 = 1: sigma(u) Q e_1 = e_1
        assert!((out.coeffs()[0] - 1.0).abs() < 1e-12);
        let e2 = Field::mode(&space, 2).unwrap();
        assert!(m.sigma_apply(&u, &e2).sobolev_norm(0.0) < 1e-14);
    }

    #[test]
    fn n_noise_beyond_modes_rejected() {
        let space = SpectralSpace::with_default_quadrature(1.0, 2).unwrap();
        let d = DiffusionSpec {
            n_noise: 3,
            spectrum: NoiseSpectrum::Power {
                lambda0: 1.0,
                decay: 1.0,
            },
            multiplier: Multiplier::Constant { value: 1.0 },
        };
        assert!(ModelSpec::new(&space, sinusoidal(), kg(1.0, 2.0), d).is_err());
    }
}
