use adapted_theta::harness::integral_reference;
use adapted_theta::quad1d::simpson;
use adapted_theta::{
    fit_convergence_rate, integrate_adapted, integrate_fixed_theta, reference_integrand, PartitionSpec,
    ThetaLimits,
};
use proptest::prelude::*;

const SIZES: [usize; 6] = [128, 256, 512, 1024, 2048, 4096];

fn demo_limits() -> ThetaLimits {
    ThetaLimits::new(1.0, 1e8).unwrap()
}

fn poly(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, k| acc * t + k)
}

fn poly_integral(c: &[f64], a: f64, b: f64) -> f64 {
    let anti =
        |t: f64| c.iter().enumerate().map(|(k, ck)| ck * t.powi(k as i32 + 1) / (k + 1) as f64).sum::<f64>();
    anti(b) - anti(a)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exact_on_low_degree(q in 1usize..=4, coeffs in prop::collection::vec(0.5f64..2.0, 5), n in 8usize..40) {
        // Below n = 2q the last subintervals have no reflected stencil and fall back to θ = 1/2.
        // Positive coefficients on a positive interval: every derivative is positive and increasing.
        let c = &coeffs[..q + 1];
        let part = PartitionSpec::new(0.5, 2.0, n).unwrap();
        let limits = ThetaLimits::new(1e3, 1e12).unwrap();
        let r = integrate_adapted(|t| poly(c, t), &part, q, &limits).unwrap();
        prop_assert_eq!(r.invalid_count, 0);
        let want = poly_integral(c, 0.5, 2.0);
        prop_assert!((r.value - want).abs() <= 1e-11 * want.abs(), "{} vs {}", r.value, want);
    }

    #[test]
    fn fixed_rule_is_additive(theta in -1.0f64..2.0, k in 1usize..20) {
        let f = |t: f64| (3.0 * t).cos() + t * t * t;
        let whole = integrate_fixed_theta(f, &PartitionSpec::new(0.0, 2.0, 2 * k).unwrap(), theta).unwrap();
        let left = integrate_fixed_theta(f, &PartitionSpec::new(0.0, 1.0, k).unwrap(), theta).unwrap();
        let right = integrate_fixed_theta(f, &PartitionSpec::new(1.0, 2.0, k).unwrap(), theta).unwrap();
        prop_assert!((whole.value - (left.value + right.value)).abs() <= 1e-13);
    }
}

fn slope(errs: &[f64]) -> f64 {
    let hs: Vec<f64> = SIZES.iter().map(|n| 6.0 / *n as f64).collect();
    fit_convergence_rate(&hs, errs).unwrap()
}

#[test]
fn adapted_order() {
    let reference = integral_reference(-3.0, 3.0);
    for q in [2, 3] {
        let errs: Vec<f64> = SIZES
            .iter()
            .map(|&n| {
                let part = PartitionSpec::new(-3.0, 3.0, n).unwrap();
                let r = integrate_adapted(reference_integrand, &part, q, &demo_limits()).unwrap();
                (r.value - reference).abs()
            })
            .collect();
        let rate = slope(&errs);
        assert!(rate >= q as f64 + 0.7, "q={q}: rate {rate}, errors {errs:?}");
    }
}

#[test]
fn trapezoid_order() {
    let reference = integral_reference(-3.0, 3.0);
    let errs: Vec<f64> = SIZES
        .iter()
        .map(|&n| {
            let part = PartitionSpec::new(-3.0, 3.0, n).unwrap();
            (integrate_fixed_theta(reference_integrand, &part, 0.5).unwrap().value - reference).abs()
        })
        .collect();
    let rate = slope(&errs);
    assert!((rate - 2.0).abs() <= 0.2, "rate {rate}");
}

#[test]
fn invalid_counts_on_demo_integrand() {
    let count = |n, q| {
        let part = PartitionSpec::new(-3.0, 3.0, n).unwrap();
        integrate_adapted(reference_integrand, &part, q, &demo_limits()).unwrap().invalid_count
    };
    assert_eq!(count(128, 2), 1);
    assert_eq!(count(512, 3), 0);
}

#[test]
fn fine_partition_matches_simpson() {
    let part = PartitionSpec::new(-3.0, 3.0, 4096).unwrap();
    let r = integrate_adapted(reference_integrand, &part, 3, &demo_limits()).unwrap();
    let oracle = simpson(reference_integrand, -3.0, 3.0, 1_000_000);
    assert!((r.value - oracle).abs() <= 1e-10, "{} vs {oracle}", r.value);
}

#[test]
fn decisions_cover_partition() {
    let part = PartitionSpec::new(-3.0, 3.0, 200).unwrap();
    for q in 1..=4 {
        let r = integrate_adapted(reference_integrand, &part, q, &demo_limits()).unwrap();
        assert_eq!(r.decisions.len(), 200);
        assert_eq!(r.invalid_count, r.decisions.iter().filter(|d| !d.valid).count());
        assert!(r.decisions.iter().filter(|d| !d.valid).all(|d| d.theta == 0.5));
    }
}
