use proptest::prelude::*;
use skwave::{bochner_norm, w_lambda_r_seminorm, BochnerSpec, Field, SpectralSpace, TimeGrid};

fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, n)
}

#[test]
fn gram_matrix_is_identity_for_several_sizes() {
    for (length, n) in [(1.0, 8), (2.5, 17), (0.3, 33)] {
        let space = SpectralSpace::with_default_quadrature(length, n).unwrap();
        let gram = space.gram_matrix();
        for i in 0..n {
            for j in 0..n {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i * n + j] - expected).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn size_mismatch_is_rejected() {
    let space = SpectralSpace::with_default_quadrature(1.0, 4).unwrap();
    assert!(space.to_spectral(&[0.0; 3]).is_err());
    assert!(Field::from_coeffs(&space, vec![0.0; 5]).is_err());
}

#[test]
fn lp_norm_rejects_small_exponent() {
    let space = SpectralSpace::with_default_quadrature(1.0, 4).unwrap();
    let e1 = Field::mode(&space, 1).unwrap();
    assert!(e1.lp_norm(0.5).is_err());
}

#[test]
fn w_seminorm_refines_under_dt_halving() {
    let space = SpectralSpace::with_default_quadrature(1.0, 4).unwrap();
    let e1 = Field::mode(&space, 1).unwrap();
    let e2 = Field::mode(&space, 2).unwrap();
    let path = |grid: &TimeGrid| -> Vec<Field> {
        grid.times()
            .into_iter()
            .map(|t| &(t * &e1) + &((t * 3.0).sin() * &e2))
            .collect()
    };
    for (lambda, r) in [(0.25, 2.0), (0.4, 1.5)] {
        let coarse = TimeGrid::new(1.0, 200).unwrap();
        let fine = TimeGrid::new(1.0, 400).unwrap();
        let a = w_lambda_r_seminorm(&path(&coarse), &coarse, lambda, r, 0.0).unwrap();
        let b = w_lambda_r_seminorm(&path(&fine), &fine, lambda, r, 0.0).unwrap();
        assert!((a - b).abs() / b < 0.05, "{a} vs {b}");
    }
}

#[test]
fn bochner_rejects_wrong_length_and_exponent() {
    let space = SpectralSpace::with_default_quadrature(1.0, 2).unwrap();
    let grid = TimeGrid::new(1.0, 4).unwrap();
    let traj = vec![Field::zeros(&space); 4];
    assert!(bochner_norm(&traj, &grid, &BochnerSpec::sup_h()).is_err());
    assert!(BochnerSpec::new(0.5, 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval_lp2_matches_h_norm(c in coeffs(12)) {
        let space = SpectralSpace::with_default_quadrature(1.0, 12).unwrap();
        let u = Field::from_coeffs(&space, c).unwrap();
        let l2 = u.lp_norm(2.0).unwrap();
        prop_assert!((l2 - u.sobolev_norm(0.0)).abs() < 1e-6);
    }

    #[test]
    fn nodal_round_trip(c in coeffs(10), length in 0.2..4.0f64) {
        let space = SpectralSpace::with_default_quadrature(length, 10).unwrap();
        let u = Field::from_coeffs(&space, c).unwrap();
        let back = space.to_spectral(&u.nodal()).unwrap();
        let again = back.nodal();
        for (a, b) in u.nodal().iter().zip(&again) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn norm_interlacing(c in coeffs(8), length in 0.5..6.0f64, s1 in -1.0..1.0f64, s2 in -1.0..1.0f64) {
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        let space = SpectralSpace::with_default_quadrature(length, 8).unwrap();
        let u = Field::from_coeffs(&space, c).unwrap();
        let alpha1 = space.eigenvalues()[0];
        let factor = 1.0_f64.max(alpha1.powf((lo - hi) / 2.0));
        prop_assert!(u.sobolev_norm(lo) <= factor * u.sobolev_norm(hi) * (1.0 + 1e-12) + 1e-14);
        for &a in space.eigenvalues().iter().filter(|&&a| a >= 1.0) {
            prop_assert!(a.powf(lo) <= a.powf(hi) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn triangle_inequality(a in coeffs(8), b in coeffs(8), s in -1.0..1.0f64, p in 1.0..6.0f64) {
        let space = SpectralSpace::with_default_quadrature(1.0, 8).unwrap();
        let u = Field::from_coeffs(&space, a).unwrap();
        let v = Field::from_coeffs(&space, b).unwrap();
        let w = &u + &v;
        prop_assert!(w.sobolev_norm(s) <= u.sobolev_norm(s) + v.sobolev_norm(s) + 1e-12);
        prop_assert!(w.lp_norm(p).unwrap() <= u.lp_norm(p).unwrap() + v.lp_norm(p).unwrap() + 1e-12);

        let grid = TimeGrid::new(1.0, 10).unwrap();
        let pu: Vec<Field> = grid.times().iter().map(|&t| t * &u).collect();
        let pv: Vec<Field> = grid.times().iter().map(|&t| (1.0 - t) * &v).collect();
        let pw: Vec<Field> = pu.iter().zip(&pv).map(|(x, y)| x + y).collect();
        let spec = BochnerSpec::new(2.0, s).unwrap();
        let nu = bochner_norm(&pu, &grid, &spec).unwrap();
        let nv = bochner_norm(&pv, &grid, &spec).unwrap();
        let nw = bochner_norm(&pw, &grid, &spec).unwrap();
        prop_assert!(nw <= nu + nv + 1e-12);
        let su = w_lambda_r_seminorm(&pu, &grid, 0.3, 2.0, s).unwrap();
        let sv = w_lambda_r_seminorm(&pv, &grid, 0.3, 2.0, s).unwrap();
        let sw = w_lambda_r_seminorm(&pw, &grid, 0.3, 2.0, s).unwrap();
        prop_assert!(sw <= su + sv + 1e-12);
    }

    #[test]
    fn seminorm_is_homogeneous(c in coeffs(4), scale in 0.0..5.0f64) {
        let space = SpectralSpace::with_default_quadrature(1.0, 4).unwrap();
        let u = Field::from_coeffs(&space, c).unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let path: Vec<Field> = grid.times().iter().map(|&t| (t * t) * &u).collect();
        let scaled: Vec<Field> = path.iter().map(|f| scale * f).collect();
        let a = w_lambda_r_seminorm(&path, &grid, 0.5, 3.0, -1.0).unwrap();
        let b = w_lambda_r_seminorm(&scaled, &grid, 0.5, 3.0, -1.0).unwrap();
        prop_assert!((b - scale * a).abs() <= 1e-10 * (1.0 + b));
    }
}
