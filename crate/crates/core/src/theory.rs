//! Analytic model of the DSC achievable under random boundary noise.
//!
//! With surface/volume ratio `c` and independent boundary-change
//! proportions `mu1` (added) and `mu2` (missing), a perturbed mask scores
//!
//! ```text
//! DSC = (1 - mu2 c) / (1 - (mu2/2 - mu1/2) c) = 2 / (1 + gamma),
//! gamma = alpha / beta,  alpha = 1 + mu1 c,  beta = 1 - mu2 c.
//! ```
//!
//! Taking `mu1, mu2 ~ U[0, 1]` gives a closed-form density for `gamma` and
//! an expectation integral for DSC, plus a cubic fit of that integral. The
//! three estimators here (quadrature, cubic, Monte Carlo) are cross-checked
//! against one another in tests.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{self, QuadratureError};
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("surface/volume ratio c = {0} is outside the model domain (0, 1)")]
    OutOfDomain(f64),
    #[error("{name} = {value} must lie in [0, 1]")]
    BadProportion { name: &'static str, value: f64 },
    #[error("sample count must be >= 1")]
    NoSamples,
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Cubic fit of the expectation integral, highest degree first.
pub const CUBIC_COEFFS: [f64; 4] = [-0.027_883_64, 0.006_280_77, -0.501_611_7, 1.000_087_59];

/// The same polynomial at the four-digit precision often quoted.
pub const CUBIC_COEFFS_ROUNDED: [f64; 4] = [-0.0279, 0.0063, -0.5016, 1.0];

fn check_c(c: f64) -> Result<(), TheoryError> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(TheoryError::OutOfDomain(c))
    }
}

fn check_mu(name: &'static str, value: f64) -> Result<(), TheoryError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(TheoryError::BadProportion { name, value })
    }
}

/// Boundary-noise parameters for a single perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryNoiseModel {
    c: f64,
    mu1: f64,
    mu2: f64,
}

impl BoundaryNoiseModel {
    pub fn new(c: f64, mu1: f64, mu2: f64) -> Result<Self, TheoryError> {
        check_c(c)?;
        check_mu("mu1", mu1)?;
        check_mu("mu2", mu2)?;
        Ok(Self { c, mu1, mu2 })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn alpha(&self) -> f64 {
        1.0 + self.mu1 * self.c
    }

    pub fn beta(&self) -> f64 {
        1.0 - self.mu2 * self.c
    }

    pub fn gamma(&self) -> f64 {
        self.alpha() / self.beta()
    }

    /// DSC through the substitution `2 / (1 + gamma)`.
    pub fn dsc(&self) -> f64 {
        2.0 / (1.0 + self.gamma())
    }
}

/// DSC for fixed boundary-change proportions.
pub fn dsc_given_mu(mu1: f64, mu2: f64, c: f64) -> Result<f64, TheoryError> {
    check_c(c)?;
    check_mu("mu1", mu1)?;
    check_mu("mu2", mu2)?;
    Ok(dsc_unchecked(mu1, mu2, c))
}

#[inline]
fn dsc_unchecked(mu1: f64, mu2: f64, c: f64) -> f64 {
    (1.0 - mu2 * c) / (1.0 - (mu2 / 2.0 - mu1 / 2.0) * c)
}

/// Support `[1, (1 + c) / (1 - c)]` of gamma.
pub fn gamma_support(c: f64) -> Result<(f64, f64), TheoryError> {
    check_c(c)?;
    Ok((1.0, (1.0 + c) / (1.0 - c)))
}

/// Density of gamma at `r`; zero outside the support.
pub fn pdf_gamma(r: f64, c: f64) -> Result<f64, TheoryError> {
    let (lo, hi) = gamma_support(c)?;
    if !(lo..=hi).contains(&r) {
        return Ok(0.0);
    }
    let r2 = r * r;
    let upper = 1f64.min((1.0 + c).powi(2) / r2);
    let lower = (1.0 - c).powi(2).max(1.0 / r2);
    Ok(((upper - lower) / (2.0 * c * c)).max(0.0))
}

/// Distribution function of gamma, integrated piecewise in closed form.
///
/// On `[1, 1+c]` the density is `(1 - r^-2)/(2c^2)`, on `[1+c, 1/(1-c)]` it
/// is `((1+c)^2 - 1)/(2c^2 r^2)`, and on `[1/(1-c), (1+c)/(1-c)]` it is
/// `((1+c)^2 r^-2 - (1-c)^2)/(2c^2)`.
pub fn cdf_gamma(r: f64, c: f64) -> Result<f64, TheoryError> {
    let (lo, hi) = gamma_support(c)?;
    if r <= lo {
        return Ok(0.0);
    }
    if r >= hi {
        return Ok(1.0);
    }
    let k = 1.0 / (2.0 * c * c);
    let b1 = 1.0 + c;
    let b2 = 1.0 / (1.0 - c);
    let seg1 = |x: f64| k * (x + 1.0 / x - 2.0);
    let seg2 = |x: f64| k * (b1 * b1 - 1.0) * (1.0 / b1 - 1.0 / x);
    let seg3 = |x: f64| k * (b1 * b1 * (1.0 / b2 - 1.0 / x) - (1.0 - c).powi(2) * (x - b2));
    let v = if r <= b1 {
        seg1(r)
    } else if r <= b2 {
        seg1(b1) + seg2(r)
    } else {
        seg1(b1) + seg2(b2) + seg3(r)
    };
    Ok(v.clamp(0.0, 1.0))
}

/// Expected DSC under uniform boundary noise, by adaptive quadrature of the
/// expectation integral in `t = DSC`, to absolute tolerance `tol`.
pub fn expected_dsc_integral(c: f64, tol: f64) -> Result<f64, TheoryError> {
    check_c(c)?;
    let lo = (1.0 - c).powi(2);
    let hi = (1.0 + c).powi(2);
    let integrand = |t: f64| {
        let r = 2.0 / t - 1.0;
        let r2 = r * r;
        let brace = 1f64.min(hi / r2) - lo.max(1.0 / r2);
        brace.max(0.0) / t
    };
    // Kinks where gamma crosses 1 + c and 1 / (1 - c).
    let kinks = [2.0 / (2.0 + c), 2.0 * (1.0 - c) / (2.0 - c)];
    let scale = c * c;
    let res = quadrature::integrate_with_breakpoints(
        integrand,
        1.0 - c,
        1.0,
        &kinks,
        tol * scale,
        quadrature::MAX_SUBDIVISIONS,
    )?;
    Ok(res.value / scale)
}

fn horner(coeffs: &[f64; 4], c: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &k| acc * c + k)
}

/// Cubic approximation of [`expected_dsc_integral`]. Refuses `c` outside
/// `(0, 1)` rather than extrapolating.
pub fn expected_dsc_cubic(c: f64) -> Result<f64, TheoryError> {
    check_c(c)?;
    Ok(horner(&CUBIC_COEFFS, c))
}

pub fn expected_dsc_cubic_rounded(c: f64) -> Result<f64, TheoryError> {
    check_c(c)?;
    Ok(horner(&CUBIC_COEFFS_ROUNDED, c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: u64,
}

/// Samples per independently seeded shard. Fixed so that the estimate does
/// not depend on the number of worker threads.
pub const MC_SHARD: u64 = 1 << 16;

#[derive(Clone, Copy)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn merge(self, o: Moments) -> Moments {
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let delta = o.mean - self.mean;
        Moments { n, mean: self.mean + delta * o.n / n, m2: self.m2 + o.m2 + delta * delta * self.n * o.n / n }
    }
}

/// Draw `(mu1, mu2)` pairs uniformly on the unit square and apply `f` to
/// each, shard by shard. Shard `k` uses the stream `(seed, k)`.
pub(crate) fn sample_shards<T: Send>(
    n_samples: u64,
    seed: u64,
    f: impl Fn(&mut rng::Stream, u64) -> T + Sync,
) -> Vec<T> {
    let shards = n_samples.div_ceil(MC_SHARD);
    (0..shards)
        .into_par_iter()
        .map(|k| {
            let len = MC_SHARD.min(n_samples - k * MC_SHARD);
            let mut s = rng::stream(seed, &[rng::tag("theory_mc"), k]);
            f(&mut s, len)
        })
        .collect()
}

/// Monte Carlo estimate of expected DSC with its standard error.
pub fn expected_dsc_montecarlo(c: f64, n_samples: u64, seed: u64) -> Result<MonteCarloEstimate, TheoryError> {
    check_c(c)?;
    if n_samples == 0 {
        return Err(TheoryError::NoSamples);
    }
    let parts = sample_shards(n_samples, seed, |s, len| {
        let mut m = Moments { n: 0.0, mean: 0.0, m2: 0.0 };
        for _ in 0..len {
            let (mu1, mu2): (f64, f64) = (s.random(), s.random());
            let x = dsc_unchecked(mu1, mu2, c);
            m.n += 1.0;
            let d = x - m.mean;
            m.mean += d / m.n;
            m.m2 += d * (x - m.mean);
        }
        m
    });
    let total = parts.into_iter().fold(Moments { n: 0.0, mean: 0.0, m2: 0.0 }, Moments::merge);
    let sd = if total.n > 1.0 { (total.m2 / (total.n - 1.0)).sqrt() } else { 0.0 };
    Ok(MonteCarloEstimate { mean: total.mean, std_error: sd / total.n.sqrt(), n_samples })
}

/// Gamma draws under uniform noise, in shard order.
pub fn sample_gamma(c: f64, n_samples: u64, seed: u64) -> Result<Vec<f64>, TheoryError> {
    check_c(c)?;
    let parts = sample_shards(n_samples, seed, |s, len| {
        (0..len)
            .map(|_| {
                let (mu1, mu2): (f64, f64) = (s.random(), s.random());
                (1.0 + mu1 * c) / (1.0 - mu2 * c)
            })
            .collect::<Vec<_>>()
    });
    Ok(parts.concat())
}

/// One row of the exported expectation curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub c: f64,
    pub cubic: f64,
    pub integral: f64,
    pub mc_mean: f64,
    pub mc_se: f64,
}

/// Evaluate all three estimators at each grid point.
pub fn curve_rows(grid: &[f64], n_samples: u64, seed: u64, tol: f64) -> Result<Vec<CurveRow>, TheoryError> {
    grid.iter()
        .enumerate()
        .map(|(i, &c)| {
            let mc = expected_dsc_montecarlo(c, n_samples, rng::derive_key(seed, &[i as u64]))?;
            Ok(CurveRow {
                c,
                cubic: expected_dsc_cubic(c)?,
                integral: expected_dsc_integral(c, tol)?,
                mc_mean: mc.mean,
                mc_se: mc.std_error,
            })
        })
        .collect()
}

/// CSV text with header `c,cubic,integral,mc_mean,mc_se`.
pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("c,cubic,integral,mc_mean,mc_se\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.c, r.cubic, r.integral, r.mc_mean, r.mc_se));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dsc_given_mu_examples() {
        for c in [0.1, 0.5, 0.9] {
            assert_eq!(dsc_given_mu(0.0, 0.0, c).unwrap(), 1.0);
            for mu in [0.2, 0.7] {
                assert!((dsc_given_mu(mu, mu, c).unwrap() - (1.0 - mu * c)).abs() < 1e-15);
            }
        }
        assert!((dsc_given_mu(1.0, 0.0, 0.5).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(dsc_given_mu(0.0, 0.0, 1.0), Err(TheoryError::OutOfDomain(1.0)));
        assert_eq!(dsc_given_mu(0.0, 0.0, 0.0), Err(TheoryError::OutOfDomain(0.0)));
        assert!(matches!(dsc_given_mu(1.1, 0.0, 0.5), Err(TheoryError::BadProportion { name: "mu1", .. })));
    }

    #[test]
    fn both_dsc_forms_agree() {
        for &c in &[0.05, 0.3, 0.77, 0.99] {
            for i in 0..=10 {
                for j in 0..=10 {
                    let (m1, m2) = (i as f64 / 10.0, j as f64 / 10.0);
                    let m = BoundaryNoiseModel::new(c, m1, m2).unwrap();
                    assert!((m.dsc() - dsc_given_mu(m1, m2, c).unwrap()).abs() < 1e-12);
                    assert!(m.alpha() >= 1.0 && m.alpha() <= 1.0 + c);
                    assert!(m.beta() >= 1.0 - c && m.beta() <= 1.0);
                    assert!(m.gamma() >= 1.0 && m.gamma() <= (1.0 + c) / (1.0 - c) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn pdf_outside_support_is_zero() {
        assert_eq!(pdf_gamma(0.99, 0.5).unwrap(), 0.0);
        assert_eq!(pdf_gamma(3.01, 0.5).unwrap(), 0.0);
        assert!(pdf_gamma(1.5, 0.5).unwrap() > 0.0);
        assert!(pdf_gamma(1.5, 1.0).is_err());
    }

    #[test]
    fn cubic_examples() {
        assert!((expected_dsc_cubic(0.0479).unwrap() - 0.976_071_7).abs() < 1e-7);
        assert!((expected_dsc_cubic(0.6975).unwrap() - 0.643_807_1).abs() < 1e-7);
        assert!(expected_dsc_cubic(1.0).is_err());
        assert!(expected_dsc_cubic(-0.1).is_err());
        let grid: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
        for w in grid.windows(2) {
            assert!(expected_dsc_cubic(w[0]).unwrap() > expected_dsc_cubic(w[1]).unwrap());
        }
    }

    #[test]
    fn rounded_cubic_tracks_full_precision() {
        for i in 1..20 {
            let c = i as f64 * 0.05;
            let d = expected_dsc_cubic(c).unwrap() - expected_dsc_cubic_rounded(c).unwrap();
            assert!(d.abs() < 5e-3, "c={c} diff={d}");
        }
    }

    #[test]
    fn integral_near_zero_c() {
        assert!((expected_dsc_integral(1e-3, 1e-9).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn mc_single_sample_lies_in_dsc_support() {
        let c = 0.4;
        let a = expected_dsc_montecarlo(c, 1, 11).unwrap();
        let b = expected_dsc_montecarlo(c, 1, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.mean >= 1.0 - c && a.mean <= 1.0);
        assert_eq!(a.std_error, 0.0);
        assert_eq!(expected_dsc_montecarlo(c, 0, 1), Err(TheoryError::NoSamples));
    }

    #[test]
    fn mc_is_independent_of_thread_count() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| expected_dsc_montecarlo(0.3, 300_001, 5).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn curve_csv_layout() {
        let rows = curve_rows(&[0.25], 1000, 1, 1e-9).unwrap();
        let csv = curve_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("c,cubic,integral,mc_mean,mc_se"));
        assert!(lines.next().unwrap().starts_with("0.25,"));
        assert!(curve_rows(&[1.0], 10, 1, 1e-9).is_err());
    }
}
