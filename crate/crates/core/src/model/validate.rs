//! Sampling-based validation of the structural hypotheses on the coefficients
//! and of the monotonicity/coercivity/growth properties of the quasilinear
//! operator `S(rho) = div(b(rho) grad rho) + F_g(rho)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::ModelSpec;
use crate::error::{invalid, Error, Result};
use crate::spectral::Field;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    /// Half-width of the sampled interval `[-R, R]`.
    pub r_check: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Set when the model feeds the small-mass convergence study, which needs `theta in (1, 3)`.
    pub appendix_experiment: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            r_check: 10.0,
            n_samples: 10_000,
            seed: 0,
            appendix_experiment: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Smallest slack observed (negative when violated), or the fitted constant for
    /// the operator checks.
    pub margin: f64,
    pub witness: Option<String>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Tracks the worst slack of a sampled inequality `lhs <= rhs`.
struct Slack {
    worst: f64,
    witness: Option<String>,
}

impl Slack {
    fn new() -> Self {
        Self {
            worst: f64::INFINITY,
            witness: None,
        }
    }

    fn record(&mut self, slack: f64, witness: impl FnOnce() -> String) {
        if slack < self.worst {
            self.worst = slack;
            if slack < 0.0 {
                self.witness = Some(witness());
            }
        }
    }

    fn outcome(self, name: &'static str, tol: f64, note: impl Into<String>) -> CheckOutcome {
        CheckOutcome {
            name,
            passed: self.worst >= -tol,
            margin: self.worst,
            witness: if self.worst >= -tol { None } else { self.witness },
            note: note.into(),
        }
    }
}

fn sample_grid(r_check: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n)
        .map(|k| -r_check + 2.0 * r_check * k as f64 / (n - 1) as f64)
        .collect()
}

/// Runs every check. Friction that fails to be positive is a hard failure and
/// is reported as [`Error::ValidationFailed`] with the deepest violation closest
/// to the origin as witness; every other failure is recorded in the report.
pub fn validate_hypotheses(model: &ModelSpec, opts: &ValidationOptions) -> Result<ValidationReport> {
    if !(opts.r_check > 0.0) {
        return invalid("R_check must be positive");
    }
    if opts.n_samples == 0 {
        return invalid("n_samples must be at least 1");
    }
    let grid = sample_grid(opts.r_check, opts.n_samples.max(2));
    let fr = &model.friction;

    // positivity of the friction: hard failure
    let values: Vec<f64> = grid.iter().map(|&r| fr.gamma(r)).collect();
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::ValidationFailed {
            check: "friction_positivity".into(),
            witness: format!("gamma({}) is not finite", grid[k]),
        });
    }
    let min_gamma = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min_gamma <= 0.0 {
        let band = 1e-3 * (min_gamma.abs() + 1.0);
        let (r, v) = grid
            .iter()
            .zip(&values)
            .filter(|(_, &v)| v <= min_gamma + band)
            .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
            .map(|(r, v)| (*r, *v))
            .expect("non-empty sample grid");
        return Err(Error::ValidationFailed {
            check: "friction_positivity".into(),
            witness: format!("gamma({r:.6}) = {v:.6} <= 0"),
        });
    }

    let mut report = ValidationReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let gamma0 = model.gamma0();
    let gamma1 = model.gamma1();

    // two-sided friction bounds and the derivative bound
    let mut bounds = Slack::new();
    let mut deriv = Slack::new();
    let dbound = fr.derivative_bound();
    for (&r, &v) in grid.iter().zip(&values) {
        bounds.record((v - gamma0).min(gamma1 - v), || {
            format!("gamma({r:.6}) = {v:.6} outside [{gamma0}, {gamma1}]")
        });
        let d = fr.dgamma(r);
        deriv.record(dbound - d.abs(), || format!("|gamma'({r:.6})| = {} > {dbound}", d.abs()));
    }
    report.checks.push(bounds.outcome(
        "friction_bounds",
        1e-12,
        format!("gamma_0 = {gamma0}, gamma_1 = {gamma1}"),
    ));
    report
        .checks
        .push(deriv.outcome("friction_derivative", 1e-12, format!("sup |gamma'| = {dbound}")));

    // strong monotonicity of g and the round trip through g^{-1}
    let mut mono = Slack::new();
    for _ in 0..opts.n_samples {
        let r1 = rng.gen_range(-opts.r_check..=opts.r_check);
        let r2 = rng.gen_range(-opts.r_check..=opts.r_check);
        let d = r1 - r2;
        let slack = (fr.g(r1) - fr.g(r2)) * d - gamma0 * d * d;
        mono.record(slack, || format!("r1 = {r1:.6}, r2 = {r2:.6}"));
    }
    report.checks.push(mono.outcome(
        "g_strong_monotonicity",
        1e-9 * opts.r_check * opts.r_check,
        "(g(r1)-g(r2))(r1-r2) >= gamma_0 |r1-r2|^2",
    ));
    let mut round = Slack::new();
    for &r in &grid {
        let err = (fr.g_inverse(fr.g(r)) - r).abs();
        round.record(1e-9 - err, || format!("|g^-1(g({r:.6})) - r| = {err:e}"));
    }
    report.checks.push(round.outcome("g_round_trip", 0.0, "tolerance 1e-9"));

    diffusion_checks(model, opts, &mut rng, &mut report);
    reaction_checks(model, opts, &grid, &mut report);
    operator_checks(model, opts, &mut rng, &mut report);

    if opts.appendix_experiment {
        let theta = model.reaction.theta();
        if !(theta > 1.0 && theta < 3.0) {
            report.warnings.push(format!(
                "theta = {theta} lies outside (1, 3); the small-mass convergence result does not cover it"
            ));
        }
    }
    Ok(report)
}

fn diffusion_checks(
    model: &ModelSpec,
    opts: &ValidationOptions,
    rng: &mut ChaCha8Rng,
    report: &mut ValidationReport,
) {
    let d = &model.diffusion;
    let length = model.space().length();
    let l_sigma = d.lipschitz_l(length);
    let kernel_max = model
        .noise_kernel()
        .iter()
        .copied()
        .fold(0.0_f64, f64::max);

    let mut lip = Slack::new();
    for _ in 0..opts.n_samples {
        let y1 = rng.gen_range(-opts.r_check..=opts.r_check);
        let y2 = rng.gen_range(-opts.r_check..=opts.r_check);
        let lhs = (d.s(0.0, y1) - d.s(0.0, y2)).powi(2) * kernel_max;
        let rhs = l_sigma * (y1 - y2).powi(2);
        lip.record(rhs - lhs, || format!("y1 = {y1:.6}, y2 = {y2:.6}"));
    }
    report.checks.push(lip.outcome(
        "diffusion_lipschitz",
        1e-10 * (1.0 + l_sigma) * opts.r_check.powi(2),
        format!("L = {l_sigma}"),
    ));

    let (summable, tail) = d.summability(length);
    report.checks.push(if summable {
        CheckOutcome {
            name: "noise_summability",
            passed: true,
            margin: tail,
            witness: None,
            note: format!("tail of sum 2 lambda_i^2 / L beyond n_noise bounded by {tail:e}"),
        }
    } else {
        let n = 1_000_000usize;
        let partial: f64 = (1..=n)
            .map(|i| {
                let l = match d.spectrum {
                    super::NoiseSpectrum::Power { lambda0, decay } => {
                        lambda0 * (i as f64).powf(-decay)
                    }
                    super::NoiseSpectrum::Explicit { .. } => 0.0,
                };
                2.0 * l * l / length
            })
            .sum();
        CheckOutcome {
            name: "noise_summability",
            passed: false,
            margin: f64::NEG_INFINITY,
            witness: Some(format!(
                "partial sum of 2 lambda_i^2 / L up to i = {n} is {partial:.3} and diverges"
            )),
            note: "requires decay > 1/2".into(),
        }
    });

    let space = model.space();
    let mut growth = Slack::new();
    for _ in 0..200 {
        let amp = rng.gen_range(0.0..opts.r_check);
        let u = random_smooth_field(space, amp, rng);
        let hs = model.sigma_hs_norm(&u);
        let bound = model.sigma_growth_bound(u.sobolev_norm(0.0));
        growth.record(bound - hs, || format!("field with |u|_H = {}", u.sobolev_norm(0.0)));
    }
    report
        .checks
        .push(growth.outcome("sigma_linear_growth", 1e-10, "HS norm <= sqrt(L)|u|_H + |O|^(1/2) sigma_0"));
}

fn reaction_checks(
    model: &ModelSpec,
    opts: &ValidationOptions,
    grid: &[f64],
    report: &mut ValidationReport,
) {
    let re = &model.reaction;
    let c1 = re.c1();
    let c2 = re.c2();
    let theta = re.theta();
    let tol = 1e-10 * (1.0 + opts.r_check.powf(theta + 1.0));

    match re.lipschitz_constant() {
        Some(lc) if !re.is_klein_gordon() => {
            let mut lip = Slack::new();
            for w in grid.windows(2) {
                let (r1, r2) = (w[0], w[1]);
                let slack = lc * (r1 - r2).abs() - (re.f(0.0, r1) - re.f(0.0, r2)).abs();
                lip.record(slack, || format!("r1 = {r1:.6}, r2 = {r2:.6}"));
            }
            report
                .checks
                .push(lip.outcome("reaction_lipschitz", 1e-12, format!("Lipschitz constant {lc}")));
            report.checks.push(CheckOutcome {
                name: "reaction_at_zero",
                passed: re.f(0.0, 0.0).is_finite(),
                margin: re.f(0.0, 0.0).abs(),
                witness: None,
                note: "sup_x |f(x, 0)| is finite".into(),
            });
        }
        _ => {
            report.checks.push(CheckOutcome {
                name: "reaction_exponent",
                passed: theta > 1.0,
                margin: theta - 1.0,
                witness: (theta <= 1.0).then(|| format!("theta = {theta}")),
                note: "theta > 1".into(),
            });
            let mut growth = Slack::new();
            let mut monotone = Slack::new();
            let mut primitive = Slack::new();
            let mut sign = Slack::new();
            for &r in grid {
                let f = re.f(0.0, r);
                let df = re.df(0.0, r);
                let a = r.abs();
                growth.record(
                    (c1 * (1.0 + a.powf(theta)) - f.abs())
                        .min(c1 * (1.0 + a.powf(theta - 1.0)) - df.abs()),
                    || format!("r = {r:.6}"),
                );
                monotone.record(-df, || format!("df/dr({r:.6}) = {df} > 0"));
                let bound = c2 * (1.0 - a.powf(theta + 1.0));
                let prim = re.antiderivative(0.0, r);
                primitive.record(bound - prim, || {
                    format!("primitive({r:.6}) = {prim:.6} > {bound:.6}")
                });
                sign.record(bound - r * f, || format!("r f(r) at r = {r:.6} is {:.6} > {bound:.6}", r * f));
            }
            report
                .checks
                .push(growth.outcome("reaction_growth", tol, format!("c1 = {c1}")));
            report
                .checks
                .push(monotone.outcome("reaction_monotone", 1e-12, "d f / d r <= 0"));
            report.checks.push(primitive.outcome(
                "primitive_upper_bound",
                tol,
                format!("c2 = {c2}"),
            ));
            report
                .checks
                .push(sign.outcome("reaction_sign_bound", tol, format!("c2 = {c2}")));
        }
    }
    report.checks.push(CheckOutcome {
        name: "reaction_x_derivative",
        passed: true,
        margin: 0.0,
        witness: None,
        note: "the reaction families do not depend on x; the bound holds trivially".into(),
    });

    // truncation agrees with f on [-n, n] and is globally Lipschitz
    let n = (opts.r_check / 2.0).max(1.0);
    let lc = re.truncated_lipschitz_constant(n);
    let mut trunc = Slack::new();
    let wide: Vec<f64> = grid.iter().map(|r| 2.0 * r).collect();
    for w in wide.windows(2) {
        let (r1, r2) = (w[0], w[1]);
        let d = (re.f_truncated(n, 0.0, r1) - re.f_truncated(n, 0.0, r2)).abs();
        trunc.record(lc * (r1 - r2).abs() * (1.0 + 1e-9) - d, || {
            format!("r1 = {r1:.6}, r2 = {r2:.6}")
        });
        if r1.abs() <= n {
            let gap = (re.f_truncated(n, 0.0, r1) - re.f(0.0, r1)).abs();
            trunc.record(-gap, || format!("truncation differs from f at r = {r1:.6}"));
        }
    }
    report.checks.push(trunc.outcome(
        "truncation_lipschitz",
        1e-12,
        format!("level n = {n}, constant {lc}, c1 (1 + n^(theta-1)) = {}", c1 * (1.0 + n.powf(theta - 1.0))),
    ));
}

fn random_smooth_field(space: &std::sync::Arc<crate::SpectralSpace>, amp: f64, rng: &mut ChaCha8Rng) -> Field {
    let mut coeffs = vec![0.0; space.n_modes()];
    for (i, c) in coeffs.iter_mut().enumerate().take(8) {
        let z: f64 = rng.sample(StandardNormal);
        *c = amp * z / ((i + 1) as f64).powi(2);
    }
    Field::from_coeffs(space, coeffs).expect("coefficient count matches space")
}

/// Pieces of `S(rho)` on a band-limited `rho`.
struct OperatorEval {
    s_hat: Vec<f64>,
    u_nodal: Vec<f64>,
}

fn eval_operator(model: &ModelSpec, rho: &Field) -> OperatorEval {
    let space = model.space();
    let rn = rho.nodal();
    let u_nodal: Vec<f64> = rn.iter().map(|&y| model.g_inverse(y)).collect();
    let w_hat = space.analyze_vec(&u_nodal);
    let f_nodal: Vec<f64> = space
        .nodes()
        .iter()
        .zip(&u_nodal)
        .map(|(&x, &u)| model.f_eval(x, u))
        .collect();
    let f_hat = space.analyze_vec(&f_nodal);
    let s_hat = space
        .eigenvalues()
        .iter()
        .zip(w_hat.iter().zip(&f_hat))
        .map(|(a, (w, f))| -a * w + f)
        .collect();
    OperatorEval { s_hat, u_nodal }
}

fn hs_sq_diff(model: &ModelSpec, u1: &[f64], u2: &[f64]) -> f64 {
    let sum: f64 = model
        .space()
        .nodes()
        .iter()
        .zip(u1.iter().zip(u2))
        .zip(model.noise_kernel())
        .map(|((&x, (&a, &b)), &k)| (model.diffusion.s(x, a) - model.diffusion.s(x, b)).powi(2) * k)
        .sum();
    model.space().spacing() * sum
}

fn operator_checks(
    model: &ModelSpec,
    _opts: &ValidationOptions,
    rng: &mut ChaCha8Rng,
    report: &mut ValidationReport,
) {
    let space = model.space();
    let gamma1 = model.gamma1();
    let theta = model.reaction.theta();
    let kappa = if model.reaction.is_klein_gordon() {
        model.reaction.c2() / gamma1.powf(theta)
    } else {
        0.0
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let amplitudes = [0.1, 0.5, 1.0, 2.0, 4.0];

    let mut c_coercive = 0.0_f64;
    let mut c_monotone = 0.0_f64;
    let mut c_growth = 0.0_f64;
    for &amp in &amplitudes {
        for _ in 0..20 {
            let rho = random_smooth_field(space, amp, rng);
            let ev = eval_operator(model, &rho);
            let h1_sq = rho.sobolev_norm(1.0).powi(2);
            let h_sq = rho.sobolev_norm(0.0).powi(2);
            let hs_sq = model.sigma_hs_norm_nodal(&ev.u_nodal).powi(2);
            let lp = rho.lp_norm(theta + 1.0).unwrap_or(0.0).powf(theta + 1.0);
            let lhs = dot(&ev.s_hat, rho.coeffs()) + hs_sq;
            let known = -h1_sq / gamma1 - kappa * lp;
            c_coercive = c_coercive.max((lhs - known) / (1.0 + h_sq));

            let s_hm1_sq: f64 = ev
                .s_hat
                .iter()
                .zip(space.eigenvalues())
                .map(|(s, a)| s * s / a)
                .sum();
            c_growth = c_growth
                .max(s_hm1_sq / ((1.0 + h1_sq) * (1.0 + h_sq.powf(theta - 1.0))));

            let rho2 = random_smooth_field(space, amp, rng);
            let ev2 = eval_operator(model, &rho2);
            let delta = &rho - &rho2;
            let d_h_sq = delta.sobolev_norm(0.0).powi(2);
            if d_h_sq > 0.0 {
                let ds: Vec<f64> = ev.s_hat.iter().zip(&ev2.s_hat).map(|(a, b)| a - b).collect();
                let lhs = dot(&ds, delta.coeffs()) + hs_sq_diff(model, &ev.u_nodal, &ev2.u_nodal);
                let known = -delta.sobolev_norm(1.0).powi(2) / gamma1;
                let weight = (1.0 + rho2.sobolev_norm(1.0).powi(2)) * d_h_sq;
                c_monotone = c_monotone.max((lhs - known) / weight);
            }
        }
    }
    report.checks.push(CheckOutcome {
        name: "operator_coercivity",
        passed: c_coercive.is_finite(),
        margin: c_coercive,
        witness: None,
        note: format!(
            "smallest admissible c with <S(rho),rho> + |sigma_g|^2 <= -|rho|_H1^2/gamma_1 - {kappa:.4} |rho|^(theta+1) + c (1 + |rho|_H^2)"
        ),
    });
    report.checks.push(CheckOutcome {
        name: "operator_local_monotonicity",
        passed: c_monotone.is_finite(),
        margin: c_monotone,
        witness: None,
        note: "smallest admissible c in the local monotonicity bound".into(),
    });
    report.checks.push(CheckOutcome {
        name: "operator_growth",
        passed: c_growth.is_finite(),
        margin: c_growth,
        witness: None,
        note: "smallest admissible c with |S(rho)|_{H^-1}^2 <= c (1 + |rho|_H1^2)(1 + |rho|_H^(2(theta-1)))".into(),
    });

    // hemicontinuity: s -> <S(rho1 + s rho2), rho> has increments that shrink
    // with the sampling step
    let rho1 = random_smooth_field(space, 1.0, rng);
    let rho2 = random_smooth_field(space, 1.0, rng);
    let test = random_smooth_field(space, 1.0, rng);
    let pairing = |s: f64| {
        let arg = &rho1 + &(s * &rho2);
        dot(&eval_operator(model, &arg).s_hat, test.coeffs())
    };
    let max_jump = |n: usize| {
        let vals: Vec<f64> = (0..=n).map(|k| pairing(-1.0 + 2.0 * k as f64 / n as f64)).collect();
        vals.windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0_f64, f64::max)
    };
    let coarse = max_jump(200);
    let fine = max_jump(400);
    let ratio = if coarse > 1e-14 { fine / coarse } else { 0.0 };
    report.checks.push(CheckOutcome {
        name: "operator_hemicontinuity",
        passed: ratio <= 0.75 && fine.is_finite(),
        margin: ratio,
        witness: (ratio > 0.75).then(|| format!("jump ratio {ratio} under step halving")),
        note: "maximal increment ratio when halving the step (about 0.5 for a continuous map)".into(),
    });
}
