mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use skwave::{
    bochner_norm, integrate_wave, max_stable_dt, residual_check, sample_for_model, solve_limit_spde,
    solve_skeleton, BochnerSpec, ControlPath, DiffusionSpec, Field, FrictionSpec, LimitVariant,
    ModelSpec, Multiplier, NoiseScale, NoiseSpectrum, ReactionSpec, RhoTrajectory, SpectralSpace,
    TimeGrid, WaveOptions,
};

fn hat(space: &Arc<SpectralSpace>) -> Field {
    Field::from_fn(space, |x| 3.0 * x.min(1.0 - x))
}

fn sine(space: &Arc<SpectralSpace>) -> Field {
    Field::from_fn(space, |x| (PI * x).sin())
}

fn some_control(space: &Arc<SpectralSpace>, grid: TimeGrid) -> ControlPath {
    ControlPath::from_fn(space, grid, |t, x| {
        (1.0 + t) * (PI * x).sin() - 0.5 * (2.0 * PI * t).cos() * (3.0 * PI * x).sin()
    })
}

fn sup_h_gap(a: &[Field], b: &[Field]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).sobolev_norm(0.0))
        .fold(0.0, f64::max)
}

#[test]
fn skeleton_time_self_convergence() {
    let model = common::default_model(32, 8);
    let u0 = sine(model.space());
    let finals: Vec<Field> = [250, 500, 1000]
        .iter()
        .map(|&n| {
            let grid = TimeGrid::new(0.5, n).unwrap();
            let phi = some_control(model.space(), grid);
            solve_skeleton(&model, &u0, &phi, &grid, 32).unwrap().last().clone()
        })
        .collect();
    let ratio = (&finals[0] - &finals[1]).sobolev_norm(0.0) / (&finals[1] - &finals[2]).sobolev_norm(0.0);
    println!("skeleton self-convergence ratio {ratio:.3}");
    assert!((1.6..2.5).contains(&ratio), "{ratio}");
}

#[test]
fn galerkin_self_convergence() {
    let model = common::default_model(128, 8);
    let fine = model.space().clone();
    let u0 = hat(&fine);
    let grid = TimeGrid::new(0.2, 400).unwrap();
    let phi = ControlPath::zeros(&fine, grid);
    let runs: Vec<Vec<Field>> = [16, 32, 64, 128]
        .iter()
        .map(|&n| {
            solve_skeleton(&model, &u0, &phi, &grid, n)
                .unwrap()
                .snapshots()
                .iter()
                .map(|f| f.resample_to(&fine).unwrap())
                .collect()
        })
        .collect();
    let spec = BochnerSpec::new(2.0, 0.0).unwrap();
    let gaps: Vec<f64> = runs
        .windows(2)
        .map(|w| {
            let diff: Vec<Field> = w[0].iter().zip(&w[1]).map(|(a, b)| a - b).collect();
            bochner_norm(&diff, &grid, &spec).unwrap()
        })
        .collect();
    println!("Galerkin gaps {gaps:?}");
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn noiseless_limit_coincides_with_skeleton() {
    let space = SpectralSpace::with_default_quadrature(1.0, 16).unwrap();
    let model = ModelSpec::new(
        &space,
        common::sinusoidal_friction(),
        ReactionSpec::KleinGordon { a: 1.0, theta: 2.0 },
        DiffusionSpec {
            multiplier: Multiplier::Constant { value: 0.0 },
            spectrum: NoiseSpectrum::Power {
                lambda0: 1.0,
                decay: 1.5,
            },
            n_noise: 8,
        },
    )
    .unwrap();
    let grid = TimeGrid::new(0.5, 500).unwrap();
    let xi = sample_for_model(&model, &grid, 3, 0);
    let u0 = hat(&space);
    let skeleton = solve_skeleton(&model, &u0, &ControlPath::zeros(&space, grid), &grid, 16).unwrap();
    let limit = solve_limit_spde(&model, &u0, &xi, &grid, LimitVariant::RhoForm).unwrap();
    assert!(sup_h_gap(skeleton.snapshots(), limit.snapshots()) < 1e-10);
}

#[test]
fn variants_agree_for_constant_friction() {
    let space = SpectralSpace::with_default_quadrature(1.0, 16).unwrap();
    let model = ModelSpec::new(
        &space,
        FrictionSpec::Constant { gamma: 2.0 },
        ReactionSpec::KleinGordon { a: 1.0, theta: 2.0 },
        common::default_diffusion(8),
    )
    .unwrap();
    let grid = TimeGrid::new(0.5, 1000).unwrap();
    let u0 = sine(&space);
    for seed in 0..3 {
        let xi = sample_for_model(&model, &grid, seed, 0);
        let rho = solve_limit_spde(&model, &u0, &xi, &grid, LimitVariant::RhoForm).unwrap();
        let uf = solve_limit_spde(&model, &u0, &xi, &grid, LimitVariant::UFormWithCorrector).unwrap();
        let gap = sup_h_gap(&rho.u_snapshots(&model), &uf.u_snapshots(&model));
        assert!(gap < 1e-3, "seed {seed}: {gap}");
        let nc = solve_limit_spde(&model, &u0, &xi, &grid, LimitVariant::RhoFormWithoutCorrector).unwrap();
        assert!(sup_h_gap(rho.snapshots(), nc.snapshots()) < 1e-12);
    }
}

#[test]
fn transform_consistency_improves_with_dt() {
    let model = common::default_model(16, 8);
    let u0 = sine(model.space());
    let fine = TimeGrid::new(0.5, 4000).unwrap();
    let xi = sample_for_model(&model, &fine, 12, 0);
    let gaps: Vec<f64> = [4, 2, 1]
        .iter()
        .map(|&factor| {
            let xi = xi.coarsen(factor).unwrap();
            let grid = *xi.grid();
            let rho = solve_limit_spde(&model, &u0, &xi, &grid, LimitVariant::RhoForm).unwrap();
            let uf = solve_limit_spde(&model, &u0, &xi, &grid, LimitVariant::UFormWithCorrector).unwrap();
            sup_h_gap(&rho.u_snapshots(&model), &uf.u_snapshots(&model))
        })
        .collect();
    println!("rho-form vs u-form gaps {gaps:?}");
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn linear_spde_matches_ou_moments() {
    let space = SpectralSpace::with_default_quadrature(1.0, 4).unwrap();
    let (gamma, c, lambda) = (2.0, 1.0, 1.0);
    let model = common::linear_model(&space, gamma, c, vec![lambda]);
    let grid = TimeGrid::new(1.0, 1000).unwrap();
    let u0 = 0.5 * &Field::mode(&space, 1).unwrap();
    let n = 4000;
    let samples: Vec<f64> = (0..n)
        .map(|s| {
            let xi = sample_for_model(&model, &grid, 17, s);
            let traj = solve_limit_spde(&model, &u0, &xi, &grid, LimitVariant::RhoForm).unwrap();
            traj.last().coeffs()[0] / gamma
        })
        .collect();
    let alpha = PI * PI;
    let k = (alpha + c) / gamma;
    let mean = 0.5 * (-k).exp();
    let var = lambda * lambda * (1.0 - (-2.0 * k).exp()) / (2.0 * gamma * (alpha + c));
    let m = samples.iter().sum::<f64>() / n as f64;
    let v = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((m - mean).abs() < 3.0 * (var / n as f64).sqrt(), "mean {m} vs {mean}");
    assert!((v - var).abs() < 3.0 * var * (2.0 / (n - 1) as f64).sqrt(), "var {v} vs {var}");
}

#[test]
fn skeleton_residual_is_first_order() {
    let model = common::default_model(32, 8);
    let grid = TimeGrid::new(0.5, 1000).unwrap();
    let u0 = sine(model.space());
    for phi in [ControlPath::zeros(model.space(), grid), some_control(model.space(), grid)] {
        let traj = solve_skeleton(&model, &u0, &phi, &grid, 32).unwrap();
        let r = residual_check(&traj, &model, Some(&phi)).unwrap();
        assert!(r <= 5.0 * grid.dt(), "residual {r}");
    }
}

#[test]
fn manufactured_solution() {
    let space = SpectralSpace::with_default_quadrature(1.0, 32).unwrap();
    let friction = common::sinusoidal_friction();
    let reaction = ReactionSpec::KleinGordon { a: 1.0, theta: 2.0 };
    let model = ModelSpec::new(
        &space,
        friction.clone(),
        reaction.clone(),
        DiffusionSpec {
            multiplier: Multiplier::Constant { value: 1.0 },
            spectrum: NoiseSpectrum::Power {
                lambda0: 1.0,
                decay: 1.5,
            },
            n_noise: 32,
        },
    )
    .unwrap();
    // rho*(t, x) = e^{-t} sin(pi x); forcing = rho_t - (b(rho) rho_x)_x - f(g^{-1} rho)
    let forcing = |t: f64, x: f64| {
        let e = (-t).exp();
        let rho = e * (PI * x).sin();
        let rho_x = e * PI * (PI * x).cos();
        let rho_xx = -PI * PI * rho;
        let u = friction.g_inverse(rho);
        let b = 1.0 / friction.gamma(u);
        let db = -friction.dgamma(u) / friction.gamma(u).powi(3);
        -rho - (db * rho_x * rho_x + b * rho_xx) - reaction.f(x, u)
    };
    let grid = TimeGrid::new(0.5, 1000).unwrap();
    let lambdas = model.lambdas().to_vec();
    let steps = (0..grid.n_steps())
        .map(|k| {
            let t = grid.time(k);
            let r = Field::from_fn(&space, |x| forcing(t, x));
            let c = r.coeffs().iter().zip(&lambdas).map(|(v, l)| v / l).collect();
            Field::from_coeffs(&space, c).unwrap()
        })
        .collect();
    let phi = ControlPath::from_fields(grid, steps).unwrap();
    let u0 = Field::from_fn(&space, |x| friction.g_inverse((PI * x).sin()));
    let traj = solve_skeleton(&model, &u0, &phi, &grid, 32).unwrap();
    let r = residual_check(&traj, &model, Some(&phi)).unwrap();
    assert!(r <= 5.0 * grid.dt(), "residual {r}");
    let exact = (-0.5f64).exp() * &sine(&space);
    let err = (traj.last() - &exact).sobolev_norm(0.0);
    println!("manufactured solution endpoint error {err:.3e}");
    assert!(err < 1e-2, "{err}");

    let shifted: Vec<Field> = traj
        .snapshots()
        .iter()
        .map(|f| f + &(0.1 * &Field::mode(&space, 1).unwrap()))
        .collect();
    let perturbed = RhoTrajectory::new(grid, 1, shifted, false).unwrap();
    let bad = residual_check(&perturbed, &model, Some(&phi)).unwrap();
    assert!(bad > 10.0 * r, "{bad} vs {r}");
}

#[test]
fn h_norm_of_rho_is_dissipated() {
    let model = common::default_model(32, 8);
    let grid = TimeGrid::new(0.5, 500).unwrap();
    let traj = solve_skeleton(&model, &hat(model.space()), &ControlPath::zeros(model.space(), grid), &grid, 32).unwrap();
    for w in traj.snapshots().windows(2) {
        assert!(w[1].sobolev_norm(0.0).powi(2) <= w[0].sobolev_norm(0.0).powi(2) + grid.dt() * grid.dt());
    }
}

#[test]
fn wave_with_scaled_noise_tracks_controlled_skeleton() {
    let model = common::default_model(16, 8);
    let u0 = sine(model.space());
    let grid = TimeGrid::with_max_step(0.5, max_stable_dt(&model, 1e-3)).unwrap();
    let phi = some_control(model.space(), grid);
    let skeleton = solve_skeleton(&model, &u0, &phi, &grid, 16).unwrap().u_snapshots(&model);
    let xi = sample_for_model(&model, &grid, 6, 0);
    let errors: Vec<f64> = [1e-1, 1e-3]
        .iter()
        .map(|&mu| {
            let traj = integrate_wave(&model, mu, NoiseScale::SqrtMu, &u0, &Field::zeros(model.space()), &grid, Some(&xi), Some(&phi), &WaveOptions::default())
                .unwrap();
            sup_h_gap(&traj.u_snapshots(), &skeleton)
        })
        .collect();
    println!("wave vs skeleton {errors:?}");
    assert!(errors[1] < errors[0], "{errors:?}");
}
