mod common;

use proptest::prelude::*;
use skwave::{
    validate_hypotheses, DiffusionSpec, Error, Field, FrictionSpec, ModelSpec, Multiplier,
    NoiseSpectrum, ReactionSpec, SpectralSpace, ValidationOptions,
};

fn frictions() -> Vec<FrictionSpec> {
    vec![
        common::sinusoidal_friction(),
        FrictionSpec::Rational { c0: 1.0, c1: 2.0 },
        FrictionSpec::Constant { gamma: 1.3 },
    ]
}

#[test]
fn default_model_passes_every_check() {
    let model = common::default_model(16, 8);
    let opts = ValidationOptions {
        n_samples: 2000,
        ..ValidationOptions::default()
    };
    let report = validate_hypotheses(&model, &opts).unwrap();
    let failed: Vec<_> = report.failures().map(|c| c.name).collect();
    assert!(failed.is_empty(), "{failed:?}");
    assert!(report.get("operator_coercivity").unwrap().margin.is_finite());
}

#[test]
fn negative_friction_reports_witness() {
    let space = SpectralSpace::with_default_quadrature(1.0, 8).unwrap();
    let model = ModelSpec::new(
        &space,
        FrictionSpec::Sinusoidal {
            base: 0.0,
            amplitude: 1.0,
        },
        ReactionSpec::KleinGordon { a: 1.0, theta: 2.0 },
        common::default_diffusion(4),
    );
    let err = match model {
        Err(e) => e,
        Ok(m) => validate_hypotheses(&m, &ValidationOptions::default()).unwrap_err(),
    };
    match err {
        Error::ValidationFailed { check, witness } => {
            assert_eq!(check, "friction_positivity");
            let r: f64 = witness
                .trim_start_matches("gamma(")
                .split(')')
                .next()
                .unwrap()
                .parse()
                .unwrap();
            assert!((r + std::f64::consts::FRAC_PI_2).abs() < 0.1, "{witness}");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn corrector_vanishes_for_constant_friction() {
    let space = SpectralSpace::with_default_quadrature(1.0, 8).unwrap();
    let model = ModelSpec::new(
        &space,
        FrictionSpec::Constant { gamma: 2.0 },
        ReactionSpec::KleinGordon { a: 1.0, theta: 2.0 },
        common::default_diffusion(8),
    )
    .unwrap();
    let u = Field::from_fn(&space, |x| 3.0 * (std::f64::consts::PI * x).sin());
    assert!(model.corrector_drift(&u).coeffs().iter().all(|&c| c == 0.0));

    let varying = common::default_model(8, 8);
    assert!(varying.corrector_drift(&u).sobolev_norm(0.0) > 1e-3);
}

#[test]
fn summability_partial_sums() {
    let good = common::default_diffusion(16);
    assert!(good.summability(1.0).0);
    let bad = DiffusionSpec {
        multiplier: Multiplier::Constant { value: 1.0 },
        spectrum: NoiseSpectrum::Power {
            lambda0: 1.0,
            decay: 0.4,
        },
        n_noise: 16,
    };
    assert!(!bad.summability(1.0).0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn g_is_strongly_monotone(r1 in -10.0..10.0f64, r2 in -10.0..10.0f64) {
        for fr in frictions() {
            let lhs = (fr.g(r1) - fr.g(r2)) * (r1 - r2);
            prop_assert!(lhs >= fr.lower() * (r1 - r2).powi(2) * (1.0 - 1e-12) - 1e-12);
        }
    }

    #[test]
    fn g_round_trips(r in -10.0..10.0f64) {
        for fr in frictions() {
            prop_assert!((fr.g_inverse(fr.g(r)) - r).abs() < 1e-9);
            prop_assert!((fr.g(fr.g_inverse(r)) - r).abs() < 1e-9);
        }
    }

    #[test]
    fn b_lies_between_friction_bounds(y in -30.0..30.0f64) {
        for fr in frictions() {
            let b = fr.b(y);
            prop_assert!(b >= 1.0 / fr.upper() - 1e-14 && b <= 1.0 / fr.lower() + 1e-14);
        }
    }

    #[test]
    fn truncation_agrees_inside_and_is_lipschitz(
        n in 1.0..5.0f64,
        r in -1.0..1.0f64,
        r1 in -20.0..20.0f64,
        r2 in -20.0..20.0f64,
        theta in 1.2..3.5f64,
    ) {
        let f = ReactionSpec::KleinGordon { a: 1.5, theta };
        let inside = r * n;
        prop_assert_eq!(f.f_truncated(n, 0.0, inside), f.f(0.0, inside));
        if r1 != r2 {
            let slope = (f.f_truncated(n, 0.0, r1) - f.f_truncated(n, 0.0, r2)).abs() / (r1 - r2).abs();
            let bound = f.c1() * (1.0 + n.powf(theta - 1.0));
            prop_assert!(slope <= bound * (1.0 + 1e-9), "slope {} bound {}", slope, bound);
        }
    }

    #[test]
    fn sigma_hs_norm_is_lipschitz(
        a in prop::collection::vec(-3.0..3.0f64, 8),
        b in prop::collection::vec(-3.0..3.0f64, 8),
    ) {
        let model = common::default_model(8, 8);
        let space = model.space().clone();
        let u1 = Field::from_coeffs(&space, a).unwrap();
        let u2 = Field::from_coeffs(&space, b).unwrap();
        let gap = (model.sigma_hs_norm(&u1) - model.sigma_hs_norm(&u2)).abs();
        let bound = model.sigma_lipschitz() * (&u1 - &u2).sobolev_norm(0.0);
        prop_assert!(gap <= bound * (1.0 + 1e-6) + 1e-12);
        prop_assert!(model.sigma_hs_norm(&u1) <= model.sigma_growth_bound(u1.sobolev_norm(0.0)) * (1.0 + 1e-6));
    }
}
