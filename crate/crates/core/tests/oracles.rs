mod common;

use common::{exponential_l2_by_quadrature, integrate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sid_core::synthetic::{exponential_l2_distance, gmm_first_three_moments, GmmComponent, GmmSpec};

fn normal_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    (-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
}

fn random_spec(rng: &mut ChaCha8Rng) -> GmmSpec {
    let k = rng.random_range(1..=4);
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut comps: Vec<GmmComponent> = raw
        .iter()
        .map(|w| GmmComponent {
            weight: w / total,
            mean: rng.random_range(-3.0..3.0),
            std: rng.random_range(0.3..2.0),
        })
        .collect();
    // Absorb rounding so the weights sum to one.
    let rest: f64 = comps[1..].iter().map(|c| c.weight).sum();
    comps[0].weight = 1.0 - rest;
    GmmSpec::new(comps).unwrap()
}

#[test]
fn mixture_moments_match_numeric_integration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..20 {
        let spec = random_spec(&mut rng);
        let pdf = |x: f64| {
            spec.components()
                .iter()
                .map(|c| c.weight * normal_pdf(x, c.mean, c.std))
                .sum::<f64>()
        };
        let (lo, hi) = (-3.0 - 2.0 * 15.0, 3.0 + 2.0 * 15.0);
        let mean = integrate(&|x| x * pdf(x), lo, hi, 1e-13);
        let var = integrate(&|x| (x - mean).powi(2) * pdf(x), lo, hi, 1e-13);
        let third = integrate(&|x| (x - mean).powi(3) * pdf(x), lo, hi, 1e-13);
        let m = gmm_first_three_moments(&spec);
        assert!((m.mean - mean).abs() < 1e-8, "{} vs {mean}", m.mean);
        assert!((m.variance - var).abs() < 1e-8, "{} vs {var}", m.variance);
        assert!((m.third_central - third).abs() < 1e-8, "{} vs {third}", m.third_central);
    }
}

#[test]
fn symmetric_two_bump_mixture_by_integration() {
    let spec = GmmSpec::new(vec![
        GmmComponent { weight: 0.5, mean: -1.0, std: 1.0 },
        GmmComponent { weight: 0.5, mean: 1.0, std: 1.0 },
    ])
    .unwrap();
    let pdf = |x: f64| 0.5 * normal_pdf(x, -1.0, 1.0) + 0.5 * normal_pdf(x, 1.0, 1.0);
    let var = integrate(&|x| x * x * pdf(x), -20.0, 20.0, 1e-13);
    assert!((var - 2.0).abs() < 1e-9);
    assert_eq!(gmm_first_three_moments(&spec).variance, 2.0);
}

#[test]
#[allow(clippy::approx_constant)]
fn exponential_distance_matches_quadrature() {
    let q = exponential_l2_by_quadrature(1.0, 3.0);
    assert!((q - 2.0 / 8f64.sqrt()).abs() < 1e-9);
    assert!((exponential_l2_distance(1.0, 3.0).unwrap() - 0.7071068).abs() < 1e-6);
}

#[test]
fn exponential_distance_triangle_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let (a, b, c) = (
            rng.random_range(0.01..20.0),
            rng.random_range(0.01..20.0),
            rng.random_range(0.01..20.0),
        );
        let d = |x, y| exponential_l2_distance(x, y).unwrap();
        assert!(d(a, c) <= d(a, b) + d(b, c) + 1e-12);
        assert_eq!(d(a, b), d(b, a));
    }
}
