use proptest::prelude::*;
use skwave::{FrictionSpec, ReactionSpec, TimeGrid};
use skwave_lab::config::{
    ConventionSpec, CorrectorParams, Experiment, ExperimentConfig, FieldSpec, ModelSection,
    SkConvergenceParams, TruncationSpec,
};
use skwave_lab::experiments::{compute_corrector_test, compute_sk_convergence};
use skwave_lab::norms::{beta_of_rho, q_of_a, NormSpec, STRICT_MARGIN};
use skwave_lab::output::fmt_f64;
use skwave_lab::LabError;

#[test]
fn default_config_round_trips_through_toml() {
    let mut config = ExperimentConfig::default();
    config.experiment = Some(Experiment::SkConvergence(SkConvergenceParams::default()));
    let text = toml::to_string(&config).unwrap();
    let back = ExperimentConfig::from_toml(&text).unwrap();
    assert_eq!(back, config);
    assert_eq!(back.hash(), config.hash());
}

#[test]
fn hash_ignores_seed_and_output_but_not_the_model() {
    let a = ExperimentConfig::default();
    let mut b = a.clone();
    b.seed = 99;
    b.out = "elsewhere".into();
    assert_eq!(a.hash(), b.hash());
    let mut c = a.clone();
    c.model.n_modes = 32;
    assert_ne!(a.hash(), c.hash());
    assert_eq!(a.hash().len(), 64);
}

#[test]
fn unknown_keys_are_rejected_at_every_level() {
    for text in [
        "bogus = 1",
        "[model]\nmodes = 3",
        "[grid]\nsteps = 3",
        "[experiment]\nkind = \"validate\"\nsamples = 3",
        "[model.friction]\nfamily = \"constant\"\ngamma = 1.0\nextra = 2",
    ] {
        let err = ExperimentConfig::from_toml(text).unwrap_err();
        assert!(matches!(err, LabError::Config(_)), "{text}");
        assert!(err.to_string().contains("unknown"), "{text}: {err}");
    }
}

#[test]
fn control_convention_must_be_declared() {
    let err = ExperimentConfig::from_toml("[experiment]\nkind = \"action_min\"").unwrap_err();
    assert!(err.to_string().contains("control_convention"), "{err}");
    let ok = ExperimentConfig::from_toml("[experiment]\nkind = \"ldp_trend\"\ncontrol_convention = \"post_q\"").unwrap();
    match ok.experiment {
        Some(Experiment::LdpTrend(p)) => {
            assert_eq!(p.control_convention, ConventionSpec::PostQ);
            assert_eq!(p.radius, 0.05);
            assert_eq!(p.mus, vec![0.2, 0.1, 0.05]);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn model_sections_parse_tagged_families() {
    let text = r#"
[model]
n_modes = 16
friction = { family = "rational", c0 = 1.0, c1 = 2.0 }
reaction = { family = "lipschitz", c = 1.5 }
"#;
    let config = ExperimentConfig::from_toml(text).unwrap();
    assert_eq!(config.model.friction, FrictionSpec::Rational { c0: 1.0, c1: 2.0 });
    assert_eq!(config.model.reaction, ReactionSpec::Lipschitz { c: 1.5, h: 0.0 });
    let model = config.model.build().unwrap();
    assert_eq!(model.space().n_modes(), 16);
    assert_eq!(model.space().quad_nodes(), 64);
}

#[test]
fn truncation_accepts_names_and_levels() {
    let parse = |v: &str| {
        let text = format!("[experiment]\nkind = \"simulate\"\nnoise_scale = \"unit\"\ntruncation = {v}");
        match ExperimentConfig::from_toml(&text).unwrap().experiment {
            Some(Experiment::Simulate(p)) => p.truncation,
            other => panic!("{other:?}"),
        }
    };
    assert_eq!(parse("\"off\""), TruncationSpec::Named("off".into()));
    assert_eq!(parse("12.5"), TruncationSpec::Level(12.5));
    assert!(parse("\"sometimes\"").build().is_err());
    assert!(parse("-1.0").build().is_err());
}

#[test]
fn field_specs_scale_sines_and_check_modes() {
    let space = ModelSection {
        length: 2.0,
        n_modes: 4,
        ..ModelSection::default()
    }
    .space()
    .unwrap();
    // sin(pi x / 2) = e_1 sqrt(L / 2) with L = 2
    let f = FieldSpec::sine_mode(1, 1.0).build(&space).unwrap();
    assert!((f.value_at(1.0) - 1.0).abs() < 1e-12);
    let e = FieldSpec::basis_mode(3, 2.0).build(&space).unwrap();
    assert_eq!(e.coeffs(), &[0.0, 0.0, 2.0, 0.0]);
    assert!(FieldSpec::basis_mode(5, 1.0).build(&space).is_err());
    assert!(FieldSpec::basis_mode(0, 1.0).build(&space).is_err());
}

#[test]
fn exponent_bounds() {
    assert!((q_of_a(2.0, 0.5) - 12.0 / 5.0).abs() < 1e-15);
    assert!((q_of_a(2.0, 0.0) - 3.0).abs() < 1e-15);
    assert!((beta_of_rho(2.0, 0.0) - 0.5).abs() < 1e-15);
    assert!((beta_of_rho(2.0, 0.5) - 0.75).abs() < 1e-15);

    let ok = |n: NormSpec| n.check(2.0).is_ok();
    assert!(ok(NormSpec::X1 { a: 0.5, q: 2.4 - 2.0 * STRICT_MARGIN }));
    assert!(!ok(NormSpec::X1 { a: 0.5, q: 2.4 }));
    assert!(!ok(NormSpec::X1 { a: 0.5, q: 0.5 }));
    assert!(ok(NormSpec::X2 { delta: 0.1, p: 2.9 }));
    assert!(!ok(NormSpec::X2 { delta: 0.1, p: 3.0 }));
    assert!(!ok(NormSpec::X2 { delta: 0.0, p: 2.0 }));
    assert!(ok(NormSpec::X3 { a: 0.5, p: 3.9, rho: 0.5 }));
    assert!(!ok(NormSpec::X3 { a: 0.5, p: 4.0, rho: 0.0 }));
    assert!(!ok(NormSpec::X3 { a: 0.5, p: 2.0, rho: 0.75 }));
    assert!(!ok(NormSpec::WLambdaR { lambda: 1.0, r: 2.0, index: 0.0 }));
    assert!(ok(NormSpec::CH));
}

#[test]
fn norm_specs_parse_by_family_name() {
    let text = r#"
[experiment]
kind = "sk_convergence"
norms = [
  { family = "X1", a = 0.25 },
  { family = "W_lambda_r", lambda = 0.3, r = 2.0 },
  { family = "C_H" },
]
"#;
    match ExperimentConfig::from_toml(text).unwrap().experiment {
        Some(Experiment::SkConvergence(p)) => assert_eq!(
            p.norms,
            vec![
                NormSpec::X1 { a: 0.25, q: 2.0 },
                NormSpec::WLambdaR { lambda: 0.3, r: 2.0, index: 0.0 },
                NormSpec::CH,
            ]
        ),
        other => panic!("{other:?}"),
    }
}

#[test]
fn theta_outside_range_is_rejected_by_the_norm_study() {
    let mut model = ModelSection {
        n_modes: 8,
        reaction: ReactionSpec::KleinGordon { a: 1.0, theta: 3.5 },
        ..ModelSection::default()
    };
    model.diffusion.n_noise = 4;
    let grid = TimeGrid::new(0.1, 10).unwrap();
    let err = compute_sk_convergence(&model.build().unwrap(), &grid, &SkConvergenceParams::default(), 0).unwrap_err();
    assert!(matches!(err, LabError::InvalidArgument(_)), "{err}");
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn norm_study_is_deterministic_and_reports_medians() {
    let mut section = ModelSection {
        n_modes: 8,
        ..ModelSection::default()
    };
    section.diffusion.n_noise = 4;
    let model = section.build().unwrap();
    let grid = TimeGrid::new(0.2, 40).unwrap();
    let params = SkConvergenceParams {
        n_seeds: 3,
        ..SkConvergenceParams::default()
    };
    let a = compute_sk_convergence(&model, &grid, &params, 5).unwrap();
    let b = compute_sk_convergence(&model, &grid, &params, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.seeds, vec![5, 6, 7]);
    let medians = a.medians();
    for (m, per_mu) in medians.iter().enumerate() {
        for (k, v) in per_mu.iter().enumerate() {
            let mut vals: Vec<f64> = a.values.iter().map(|s| s[m][k]).collect();
            vals.sort_by(f64::total_cmp);
            assert_eq!(*v, vals[1]);
        }
    }
}

#[test]
fn constant_friction_triggers_a_warning() {
    let mut section = ModelSection {
        n_modes: 8,
        friction: FrictionSpec::Constant { gamma: 2.0 },
        ..ModelSection::default()
    };
    section.diffusion.n_noise = 4;
    let model = section.build().unwrap();
    let grid = TimeGrid::new(0.1, 20).unwrap();
    let params = CorrectorParams {
        n_paths: 3,
        ..CorrectorParams::default()
    };
    let result = compute_corrector_test(&model, &grid, &params, 0).unwrap();
    assert_eq!(result.warnings.len(), 1);
    for r in &result.rows {
        assert!((r.e_corr - r.e_nocorr).abs() <= 1e-12 * (1.0 + r.e_corr));
    }
}

proptest! {
    #[test]
    fn float_cells_round_trip(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        let s = fmt_f64(x);
        prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}
