#![allow(dead_code)]

use std::sync::Arc;

use skwave::{
    DiffusionSpec, FrictionSpec, ModelSpec, Multiplier, NoiseSpectrum, ReactionSpec, SpectralSpace,
};

pub fn sinusoidal_friction() -> FrictionSpec {
    FrictionSpec::Sinusoidal {
        base: 2.0,
        amplitude: 1.0,
    }
}

pub fn default_diffusion(n_noise: usize) -> DiffusionSpec {
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
        n_noise,
    }
}

/// The reference model on a smaller space: `gamma = 2 + sin r`, `f = -|r| r`,
/// `s = max(1 + 0.2 y, 0.2)`, `lambda_i = i^(-3/2)`.
pub fn default_model(n_modes: usize, n_noise: usize) -> ModelSpec {
    let space = SpectralSpace::with_default_quadrature(1.0, n_modes).unwrap();
    ModelSpec::new(
        &space,
        sinusoidal_friction(),
        ReactionSpec::KleinGordon { a: 1.0, theta: 2.0 },
        default_diffusion(n_noise),
    )
    .unwrap()
}

pub fn linear_model(space: &Arc<SpectralSpace>, gamma: f64, c: f64, lambdas: Vec<f64>) -> ModelSpec {
    ModelSpec::new(
        space,
        FrictionSpec::Constant { gamma },
        ReactionSpec::Lipschitz { c, h: 0.0 },
        DiffusionSpec {
            multiplier: Multiplier::Constant { value: 1.0 },
            n_noise: lambdas.len(),
            spectrum: NoiseSpectrum::Explicit { values: lambdas },
        },
    )
    .unwrap()
}
