mod common;

use proptest::prelude::*;
use skwave::{
    girsanov_log_weight, integrate_wave, sample_for_model, sample_increments, ControlPath, Field,
    NoiseScale, SpectralSpace, TimeGrid, WaveOptions,
};

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn sample_variance_within_chi_square_band() {
    let space = SpectralSpace::with_default_quadrature(1.0, 2).unwrap();
    let model = common::linear_model(&space, 1.0, 1.0, vec![1.0, 0.0]);
    let n = 100_000;
    let grid = TimeGrid::new(0.01 * n as f64, n).unwrap();
    let xi = sample_for_model(&model, &grid, 11, 0);
    let mode1 = xi.mode_series(1);
    let mean = mode1.iter().sum::<f64>() / n as f64;
    let var = mode1.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = 0.01 * (2.0 / (n - 1) as f64).sqrt();
    assert!((var - 0.01).abs() < 3.0 * se, "variance {var}");
    assert!(xi.mode_series(2).iter().all(|&x| x == 0.0));
}

#[test]
fn distinct_streams_are_uncorrelated() {
    let model = common::default_model(4, 1);
    let n = 50_000;
    let grid = TimeGrid::new(1.0, n).unwrap();
    let a = sample_for_model(&model, &grid, 5, 1).mode_series(1);
    let b = sample_for_model(&model, &grid, 5, 2).mode_series(1);
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let rho = dot / (na * nb);
    assert!(rho.abs() < 4.0 / (n as f64).sqrt(), "rho = {rho}");
}

#[test]
fn sampling_is_reproducible_and_checks_sizes() {
    let model = common::default_model(8, 4);
    let grid = TimeGrid::new(1.0, 50).unwrap();
    let a = sample_increments(model.space(), &common::default_diffusion(4), &grid, 3, 9).unwrap();
    let b = sample_for_model(&model, &grid, 3, 9);
    assert_eq!(a.as_slice(), b.as_slice());
    assert!(sample_increments(model.space(), &common::default_diffusion(9), &grid, 3, 9).is_err());
}

#[test]
fn girsanov_weight_is_a_martingale() {
    let space = SpectralSpace::with_default_quadrature(1.0, 3).unwrap();
    let model = common::linear_model(&space, 1.0, 1.0, vec![1.0, 0.5]);
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let phi = ControlPath::from_fn(&space, grid, |t, x| {
        (0.6 + t) * (std::f64::consts::PI * x).sin() - 0.3 * (2.0 * std::f64::consts::PI * x).sin()
    });
    let phi = ControlPath::from_fields(
        grid,
        phi.steps()
            .iter()
            .map(|f| {
                let mut c = f.coeffs().to_vec();
                c[2] = 0.0;
                Field::from_coeffs(&space, c).unwrap()
            })
            .collect(),
    )
    .unwrap();
    let mu = 0.5;
    let weights: Vec<f64> = (0..100_000)
        .map(|s| {
            let xi = sample_for_model(&model, &grid, 21, s);
            girsanov_log_weight(&phi, &xi, mu).unwrap().exp()
        })
        .collect();
    let (mean, se) = mean_and_se(&weights);
    assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean} se {se}");
}

#[test]
fn tilted_weighted_mean_reproduces_untilted_mean() {
    let space = SpectralSpace::with_default_quadrature(1.0, 4).unwrap();
    let model = common::linear_model(&space, 1.0, 1.0, vec![1.0, 0.5]);
    let mu = 0.5;
    let grid = TimeGrid::new(1.0, 50).unwrap();
    let u0 = Field::zeros(&space);
    let v0 = Field::zeros(&space);
    let phi = ControlPath::constant(&(0.8 * &Field::mode(&space, 1).unwrap()), grid);
    let functional = |u: &Field| (3.0 * u.coeffs()[0]).tanh();
    let n = 20_000u64;
    let opts = WaveOptions::default();
    let plain: Vec<f64> = (0..n)
        .map(|s| {
            let xi = sample_for_model(&model, &grid, 8, s);
            let traj = integrate_wave(&model, mu, NoiseScale::SqrtMu, &u0, &v0, &grid, Some(&xi), None, &opts)
                .unwrap();
            functional(&traj.last().u)
        })
        .collect();
    let tilted: Vec<f64> = (0..n)
        .map(|s| {
            let xi = sample_for_model(&model, &grid, 9, s);
            let traj = integrate_wave(&model, mu, NoiseScale::SqrtMu, &u0, &v0, &grid, Some(&xi), Some(&phi), &opts)
                .unwrap();
            functional(&traj.last().u) * girsanov_log_weight(&phi, &xi, mu).unwrap().exp()
        })
        .collect();
    let (m0, s0) = mean_and_se(&plain);
    let (m1, s1) = mean_and_se(&tilted);
    assert!((m0 - m1).abs() < 3.0 * (s0 * s0 + s1 * s1).sqrt(), "{m0} vs {m1}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_idempotent(
        c in prop::collection::vec(-3.0..3.0f64, 4 * 6),
        radius in 0.1..5.0f64,
    ) {
        let space = SpectralSpace::with_default_quadrature(1.0, 4).unwrap();
        let grid = TimeGrid::new(0.7, 6).unwrap();
        let steps = c.chunks(4).map(|ch| Field::from_coeffs(&space, ch.to_vec()).unwrap()).collect();
        let phi = ControlPath::from_fields(grid, steps).unwrap();
        let once = phi.project_to_ball(radius).unwrap();
        let twice = once.project_to_ball(radius).unwrap();
        prop_assert!(once.norm() <= radius * (1.0 + 1e-12));
        for (a, b) in once.steps().iter().zip(twice.steps()) {
            for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
    }
}
