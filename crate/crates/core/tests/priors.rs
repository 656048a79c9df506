use gfield::priors::{pc_precision_logdensity, pc_range_sigma_logdensity, PcPrecisionPrior, PcRangeSigmaPrior};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    quadrature::integrate(f, a, b, 1e-12).integral
}

/// `∫_a^∞ f` through `x = a + t / (1 − t)`.
fn integrate_to_inf(f: impl Fn(f64) -> f64, a: f64) -> f64 {
    integrate(
        |t| {
            let s = 1.0 - t;
            f(a + t / s) / (s * s)
        },
        0.0,
        1.0,
    )
}

fn precision_pdf(p: &PcPrecisionPrior) -> impl Fn(f64) -> f64 + '_ {
    move |tau| if tau > 0.0 { pc_precision_logdensity(tau, p).unwrap().exp() } else { 0.0 }
}

#[test]
fn precision_prior_tail_and_mass() {
    for (u, alpha) in [(1.16, 0.01), (0.5, 0.05), (3.0, 0.2)] {
        let p = PcPrecisionPrior::new(u, alpha).unwrap();
        let pdf = precision_pdf(&p);
        // P(1/√τ > U) = P(τ < U⁻²).
        let tail = integrate(&pdf, 0.0, 1.0 / (u * u));
        assert!((tail - alpha).abs() < 1e-6, "tail {tail}");
        let total = tail + integrate_to_inf(&pdf, 1.0 / (u * u));
        assert!((total - 1.0).abs() < 1e-4, "mass {total}");
        assert!((PcPrecisionPrior::alpha_for(p.lambda(), u) - alpha).abs() < 1e-12);
    }
}

#[test]
fn range_sigma_prior_tails_and_mass() {
    let p = PcRangeSigmaPrior::new(1.5, 0.05, 2.0, 0.01).unwrap();
    let joint = |r: f64, s: f64| if r > 0.0 && s > 0.0 { pc_range_sigma_logdensity(r, s, &p).unwrap().exp() } else { 0.0 };
    let sigma_marginal = |s: f64| integrate_to_inf(|r| joint(r, s), 0.0);
    let range_marginal = |r: f64| integrate_to_inf(|s| joint(r, s), 0.0);
    let p_r = integrate(range_marginal, 0.0, p.r0);
    assert!((p_r - p.alpha_r).abs() < 1e-6, "P(r < r0) = {p_r}");
    let p_s = integrate_to_inf(sigma_marginal, p.sigma0);
    assert!((p_s - p.alpha_s).abs() < 1e-6, "P(sigma > sigma0) = {p_s}");
    let mass = integrate_to_inf(range_marginal, 0.0);
    assert!((mass - 1.0).abs() < 1e-4);
}

#[test]
fn range_sigma_prior_shrinks_to_base_model() {
    let p = PcRangeSigmaPrior::new(1.0, 0.05, 1.0, 0.05).unwrap();
    let d = |s: f64| pc_range_sigma_logdensity(1.0, s, &p).unwrap();
    assert!(d(0.1) > d(0.5) && d(0.5) > d(2.0));
    // More weight on long ranges as λ_r grows.
    let upper = |q: &PcRangeSigmaPrior, r: f64| 1.0 - (-q.lambda_r() / r).exp();
    let wider = PcRangeSigmaPrior { r0: 3.0, ..p };
    for r in [0.5, 2.0, 8.0] {
        assert!(upper(&wider, r) > upper(&p, r));
    }
}

#[test]
fn marginal_sd_rule_of_thumb() {
    let u = 1.16;
    let p = PcPrecisionPrior::new(u, 0.01).unwrap();
    let exp = Exp::new(p.lambda()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 400_000;
    let mut s2 = 0.0;
    for _ in 0..n {
        let sd: f64 = exp.sample(&mut rng);
        let x = Normal::new(0.0, sd).unwrap().sample(&mut rng);
        s2 += x * x;
    }
    let sd = (s2 / n as f64).sqrt();
    assert!((sd / (0.31 * u) - 1.0).abs() < 0.1, "{sd}");
}
