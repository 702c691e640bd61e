use super::*;
use crate::rng::StreamKey;

fn pareto04() -> DistributionSpec {
    DistributionSpec::centered_pareto(0.4, 1.0).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn cdf_limits_and_support_edge() {
    let s = pareto04();
    assert_eq!(s.cdf(f64::NEG_INFINITY), 0.0);
    assert_eq!(s.cdf(-1e6), 0.0);
    assert_eq!(s.cdf(-2.0 / 3.0), 0.0);
    assert!((s.support_lower() + 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(s.cdf(f64::INFINITY), 1.0);
    // mpmath: 1 - (8/3)^{-2.5}
    assert!((s.cdf(1.0) - 0.913_885_126_230_279).abs() < 1e-14);
}

#[test]
fn cdf_is_monotone_for_every_family() {
    let specs = [
        pareto04(),
        DistributionSpec::student_t(2.5).unwrap(),
        DistributionSpec::frechet_centered(2.0).unwrap(),
        DistributionSpec::custom(0.45, 1.0, 5.0, 3.0).unwrap(),
    ];
    for s in &specs {
        let mut prev = 0.0;
        for i in 0..2000 {
            let x = -20.0 + i as f64 * 0.05;
            let c = s.cdf(x);
            assert!(c >= prev && (0.0..=1.0).contains(&c), "{:?} at {x}", s.family());
            prev = c;
        }
    }
}

#[test]
fn sample_iid_rejects_zero_and_is_deterministic() {
    let s = pareto04();
    let key = StreamKey::new(11, 0);
    assert!(matches!(sample_iid(&s, 0, &mut key.replicate(0)), Err(Error::Domain(_))));
    let a = sample_iid(&s, 50, &mut key.replicate(0)).unwrap();
    let b = sample_iid(&s, 50, &mut key.replicate(0)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn truncated_moments_known_values() {
    let s = pareto04();
    // mpmath quadrature: ∫ x dF / F over [-2/3, 1]
    let m = s.truncated_moments(1.0).unwrap();
    assert!(rel(m.mu, -0.261_748_414_355_301_15) < 1e-12, "{}", m.mu);
    let full = s.truncated_moments(f64::INFINITY).unwrap();
    assert_eq!(full.mu, 0.0);
    assert!(rel(full.sigma_sq, 20.0 / 9.0) < 1e-14);
    let far = s.truncated_moments(1e12).unwrap();
    // σ²(t) ≈ σ₀² - 5 t^{-1/2}
    assert!(rel(far.sigma_sq, 20.0 / 9.0 - 5e-6) < 1e-8);
    assert!(far.mu < 0.0 && far.mu > -1e-6);
}

#[test]
fn truncation_at_support_edge_is_a_domain_error() {
    let specs = [
        pareto04(),
        DistributionSpec::frechet_centered(2.5).unwrap(),
        DistributionSpec::custom(0.45, 1.0, 5.0, 3.0).unwrap(),
    ];
    for s in &specs {
        let edge = s.support_lower();
        assert!(matches!(s.truncated_moments(edge), Err(Error::Domain(_))), "{:?}", s.family());
        assert!(matches!(s.truncated_moments(edge - 1.0), Err(Error::Domain(_))));
    }
    assert!(matches!(
        DistributionSpec::student_t(3.0).unwrap().truncated_moments(f64::NEG_INFINITY),
        Err(Error::Domain(_))
    ));
}

#[test]
fn mu_tail_approx_examples() {
    let p = TailParams::new(0.4, 1.0, 10.0, 1.5).unwrap();
    let v = mu_tail_approx(&p, 10.0).unwrap();
    assert!(rel(v, -0.052_871_823_054_370_2) < 1e-12);
    let far = mu_tail_approx(&p, 1e12).unwrap();
    assert!(far < 0.0 && far > -1e-10);
    assert!(matches!(mu_tail_approx(&p, 1.0), Err(Error::Domain(_))));
}

#[test]
fn mu_tail_approx_is_exact_for_exact_pareto_tail() {
    let s = DistributionSpec::custom(0.4, 1.0, 20.0, 2.0).unwrap();
    let p = s.params();
    for &x in &[2.0, 10.0, 1e3, 1e6] {
        let exact = s.truncated_moments(x).unwrap().mu;
        assert!(rel(mu_tail_approx(&p, x).unwrap(), exact) < 1e-12, "{x}");
    }
}

#[test]
fn sigma_sq_tail_approx_examples() {
    let p = TailParams::new(0.4, 1.0, 10.0, 1.5).unwrap();
    let s0 = 20.0 / 9.0;
    let v = sigma_sq_tail_approx(&p, s0, 100.0).unwrap();
    assert!((v - (s0 - 0.5)).abs() < 1e-13);
    assert!((sigma_sq_tail_approx(&p, s0, 1e15).unwrap() - s0).abs() < 1e-6);
    assert!(sigma_sq_tail_approx(&p, s0, 2.0).unwrap() < 0.0);
    let heavy = TailParams::new(0.6, 1.0, 1.0, 1.5).unwrap();
    assert!(matches!(sigma_sq_tail_approx(&heavy, 1.0, 10.0), Err(Error::UnsupportedVariant(_))));
}

#[test]
fn variance_increment_examples() {
    let half = TailParams::new(0.5, 1.0, 1.0, 1.0).unwrap();
    assert!((variance_increment(&half, std::f64::consts::E, 1.0).unwrap() - 2.0).abs() < 1e-14);
    let p = TailParams::new(0.4, 1.0, 1.0, 1.0).unwrap();
    assert!((variance_increment(&p, 4.0, 1.0).unwrap() - 2.5).abs() < 1e-14);
    assert_eq!(variance_increment(&p, 3.0, 3.0).unwrap(), 0.0);
    assert!(matches!(variance_increment(&p, 0.0, 1.0), Err(Error::Domain(_))));
    assert!(matches!(variance_increment(&p, 1.0, -2.0), Err(Error::Domain(_))));
}

#[test]
fn default_delta_by_family() {
    let t = DistributionSpec::student_t(2.5).unwrap();
    assert!((t.params().xi - 0.4).abs() < 1e-15);
    assert!((default_delta(&t, Treatment::Unshifted).unwrap() - 0.8).abs() < 1e-15);
    let f = DistributionSpec::frechet_centered(2.0).unwrap();
    assert_eq!(f.params().xi, 0.5);
    assert_eq!(default_delta(&f, Treatment::Unshifted).unwrap(), 1.0);
    let p = DistributionSpec::centered_pareto(0.45, 1.0).unwrap();
    assert_eq!(default_delta(&p, Treatment::Unshifted).unwrap(), 0.45);
    assert_eq!(default_delta(&p, Treatment::Shifted).unwrap(), SHIFTED_PARETO_DELTA);
    let c = DistributionSpec::custom(0.45, 1.0, 3.0, 2.0).unwrap();
    assert!(matches!(default_delta(&c, Treatment::Unshifted), Err(Error::Config(_))));
}

#[test]
fn default_x0_sits_on_the_half_deviation_boundary() {
    for s in [pareto04(), DistributionSpec::student_t(2.5).unwrap(), DistributionSpec::frechet_centered(2.5).unwrap()] {
        let x0 = s.params().x0;
        assert!((s.tail_deviation(x0).abs() - X0_DEVIATION).abs() < 1e-6, "{:?}", s.family());
        for k in 1..50 {
            assert!(s.tail_deviation(x0 * 1.2f64.powi(k)).abs() <= X0_DEVIATION + 1e-9);
        }
    }
}

#[test]
fn student_t_tail_scale_matches_survival() {
    let s = DistributionSpec::student_t(2.5).unwrap();
    let p = s.params();
    let x: f64 = 1e5;
    let surv = 1.0 - s.cdf(x);
    let pareto = (x / p.omega).powf(-1.0 / p.xi);
    assert!(rel(surv, pareto) < 1e-3);
}

#[test]
fn summary_variance_flags() {
    assert!(rel(pareto04().summary().sigma0_sq.unwrap(), 20.0 / 9.0) < 1e-14);
    assert!(DistributionSpec::centered_pareto(0.6, 1.0).unwrap().summary().sigma0_sq.is_none());
    assert_eq!(DistributionSpec::student_t(3.0).unwrap().summary().sigma0_sq, Some(3.0));
    assert!(DistributionSpec::frechet_centered(1.5).unwrap().summary().sigma0_sq.is_none());
}

#[test]
fn json_round_trip_and_validation() {
    let s = DistributionSpec::student_t(2.5).unwrap();
    let text = serde_json::to_string(&s).unwrap();
    let back: DistributionSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(back, s);
    let minimal: DistributionSpec = serde_json::from_str(r#"{"family":"centered-pareto","xi":0.4}"#).unwrap();
    assert_eq!(minimal, pareto04());
    let bad = serde_json::from_str::<DistributionSpec>(r#"{"family":"student-t","xi":0.4,"extra":{"nu":3}}"#);
    assert!(bad.is_err());
    let no_delta = serde_json::from_str::<DistributionSpec>(r#"{"family":"custom","xi":0.4,"x0":2}"#);
    assert!(no_delta.is_err());
    assert!(serde_json::from_str::<DistributionSpec>(r#"{"family":"cauchy","xi":0.4}"#).is_err());
}

#[test]
fn custom_family_has_mean_zero() {
    let s = DistributionSpec::custom(0.45, 1.0, 5.0, 3.0).unwrap();
    let m = s.truncated_moments(f64::INFINITY).unwrap();
    assert_eq!(m.mu, 0.0);
    // mean of body plus tail
    let far = s.truncated_moments(1e14).unwrap();
    assert!(far.mu.abs() < 1e-5);
}

#[test]
fn doubly_truncated_variance_of_symmetric_window() {
    let s = DistributionSpec::student_t(3.0).unwrap();
    let m = s.doubly_truncated_moments(-50.0, 50.0).unwrap();
    assert!(m.mu.abs() < 1e-10);
    let one_sided = s.truncated_moments(50.0).unwrap();
    // removing the far left tail can only shrink the variance
    assert!(m.sigma_sq < one_sided.sigma_sq);
    assert!(m.sigma_sq > 2.0);
}
