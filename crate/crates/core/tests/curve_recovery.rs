//! Recovery of known learning curves from synthetic observations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use segplan::curves::{fit, invert, CurveLaw, Crossing, Observation};

/// Generators with their targets. Crossings lie inside the sampled range.
const CASES: [(CurveLaw, [f64; 3], f64); 4] = [
    (CurveLaw::Power, [-60.0, -0.5, 95.0], 88.0),
    (CurveLaw::Arctan, [0.03, 0.5, -10.0], 70.0),
    (CurveLaw::Logarithmic, [8.0, 5.0, 40.0], 75.0),
    (CurveLaw::AlgebraicRoot, [1.1, 0.3, 0.0], 40.0),
];

/// Analytic inverse of each generator, written out independently of the
/// library's closed forms.
fn analytic_crossing(law: CurveLaw, t: [f64; 3], target: f64) -> f64 {
    use std::f64::consts::PI;
    match law {
        CurveLaw::Power => ((target - t[2]) / t[0]).powf(1.0 / t[1]),
        CurveLaw::Arctan => (((target - t[2]) * PI / 200.0).tan() - t[1]) / (t[0] * PI / 2.0),
        CurveLaw::Logarithmic => ((target - t[2]) / t[0]).exp() - t[1],
        CurveLaw::AlgebraicRoot => {
            let y = (target - t[2]) / 100.0;
            y / (1.0 - (t[0] * y).powf(t[1])).powf(1.0 / t[1])
        }
    }
}

fn formula(law: CurveLaw, t: [f64; 3], n: f64) -> f64 {
    use std::f64::consts::PI;
    match law {
        CurveLaw::Power => t[0] * n.powf(t[1]) + t[2],
        CurveLaw::Arctan => 200.0 / PI * (t[0] * PI / 2.0 * n + t[1]).atan() + t[2],
        CurveLaw::Logarithmic => t[0] * (n + t[1]).ln() + t[2],
        CurveLaw::AlgebraicRoot => 100.0 * n / (1.0 + (t[0] * n).abs().powf(t[1])).powf(1.0 / t[1]) + t[2],
    }
}

fn observations(law: CurveLaw, t: [f64; 3], sigma: f64, seed: u64) -> Vec<Observation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma.max(1e-300)).unwrap();
    (1..=20)
        .map(|i| {
            let x = 5.0 * i as f64;
            let e = if sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            Observation::new(x, (formula(law, t, x) + e).clamp(0.0, 100.0))
        })
        .collect()
}

fn predicted(obs: &[Observation], law: CurveLaw, target: f64) -> f64 {
    let f = fit(obs, law, 17).unwrap();
    match invert(&f, target, 1e4).unwrap() {
        Crossing::Reached { n, .. } => n,
        other => panic!("{law}: {other:?}"),
    }
}

#[test]
fn generator_crossings_are_inside_the_data_range() {
    for (law, t, target) in CASES {
        let n = analytic_crossing(law, t, target);
        assert!((5.0..=100.0).contains(&n), "{law}: {n}");
        assert!((formula(law, t, n) - target).abs() < 1e-9);
    }
}

#[test]
fn noiseless_recovery_within_one_percent() {
    for (law, t, target) in CASES {
        let truth = analytic_crossing(law, t, target);
        let n = predicted(&observations(law, t, 0.0, 0), law, target);
        let rel = (n - truth).abs() / truth;
        assert!(rel < 0.01, "{law}: predicted {n}, truth {truth}, rel {rel}");
    }
}

#[test]
fn noisy_recovery_within_fifteen_percent() {
    for (law, t, target) in CASES {
        let truth = analytic_crossing(law, t, target);
        for seed in 0..5 {
            let n = predicted(&observations(law, t, 0.5, seed), law, target);
            let rel = (n - truth).abs() / truth;
            assert!(rel < 0.15, "{law} seed {seed}: predicted {n}, truth {truth}, rel {rel}");
        }
    }
}
