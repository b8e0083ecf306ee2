//! Learning-curve laws: fitting, evaluation and inversion.
//!
//! Performance is in percent DSC throughout. The four laws are
//!
//! | law            | formula                                          |
//! |----------------|--------------------------------------------------|
//! | power          | `t1 * n^t2 + t3`                                 |
//! | arctan         | `(200/pi) * atan(t1 * (pi/2) * n + t2) + t3`     |
//! | logarithmic    | `t1 * ln(n + t2) + t3`                           |
//! | algebraic root | `100 n / (1 + |t1 n|^t2)^(1/t2) + t3`            |
//!
//! Fits minimise squared percent residuals with bounded Levenberg–Marquardt
//! from seeded multi-starts. Parameter bounds keep every law non-decreasing
//! in `n`, which is what makes inversion by bisection valid.

mod lsq;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
pub use lsq::{Bounds, Params};
use lsq::LmOptions;

pub const PREDICTIONS_SCHEMA: &str = "curve_predictions.v1";

/// Default number of multi-starts per fit.
pub const DEFAULT_STARTS: usize = 24;

#[derive(Debug, Error, PartialEq)]
pub enum CurveError {
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("observation x values are all equal; the curve is not identifiable")]
    DegenerateX,
    #[error("invalid observation {index}: {reason}")]
    InvalidObservation { index: usize, reason: String },
    #[error("{law} is not finite at n = {n} with theta {theta:?}")]
    NonFinite { law: CurveLaw, n: f64, theta: Params },
    #[error("no converged monotone start for {law} ({} starts tried)", .diagnostics.len())]
    FitFailed { law: CurveLaw, diagnostics: Vec<StartDiagnostic> },
    #[error("invalid inversion request: {0}")]
    BadInversion(String),
    #[error("unknown law {0:?} (expected power, arctan, logarithmic or algebraic_root)")]
    UnknownLaw(String),
    #[error("observations file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveLaw {
    Power,
    Arctan,
    Logarithmic,
    AlgebraicRoot,
}

impl CurveLaw {
    pub const ALL: [CurveLaw; 4] = [CurveLaw::Power, CurveLaw::Arctan, CurveLaw::Logarithmic, CurveLaw::AlgebraicRoot];

    pub fn name(self) -> &'static str {
        match self {
            CurveLaw::Power => "power",
            CurveLaw::Arctan => "arctan",
            CurveLaw::Logarithmic => "logarithmic",
            CurveLaw::AlgebraicRoot => "algebraic_root",
        }
    }

    /// Raw formula value; may be non-finite outside the law's domain.
    pub fn eval(self, theta: &Params, n: f64) -> f64 {
        let [t1, t2, t3] = *theta;
        match self {
            CurveLaw::Power => t1 * n.powf(t2) + t3,
            CurveLaw::Arctan => {
                200.0 / std::f64::consts::PI * (t1 * std::f64::consts::FRAC_PI_2 * n + t2).atan() + t3
            }
            CurveLaw::Logarithmic => t1 * (n + t2).ln() + t3,
            CurveLaw::AlgebraicRoot => 100.0 * n / (1.0 + (t1 * n).abs().powf(t2)).powf(1.0 / t2) + t3,
        }
    }

    /// Limit as `n -> infinity`, when finite.
    pub fn asymptote(self, theta: &Params) -> Option<f64> {
        let [t1, t2, t3] = *theta;
        match self {
            CurveLaw::Power if t2 < 0.0 || t1 == 0.0 => Some(t3),
            CurveLaw::Power if t2 == 0.0 => Some(t1 + t3),
            CurveLaw::Power => None,
            CurveLaw::Arctan if t1 > 0.0 => Some(100.0 + t3),
            CurveLaw::Arctan => Some(self.eval(theta, 1.0)),
            CurveLaw::Logarithmic if t1 == 0.0 => Some(t3),
            CurveLaw::Logarithmic => None,
            CurveLaw::AlgebraicRoot if t1 != 0.0 && t2 > 0.0 => Some(100.0 / t1.abs() + t3),
            CurveLaw::AlgebraicRoot => None,
        }
    }

    /// Parameter boxes searched by [`fit`]; the power law has two
    /// orientations (decaying deficit and growing gain).
    pub fn bounds(self, x_min: f64, x_max: f64) -> Vec<Bounds> {
        let t3 = (-100.0, 100.0);
        match self {
            CurveLaw::Power => vec![
                Bounds { lo: [-200.0, -5.0, t3.0], hi: [0.0, 0.0, t3.1] },
                Bounds { lo: [0.0, 0.0, t3.0], hi: [200.0, 5.0, t3.1] },
            ],
            CurveLaw::Arctan => vec![Bounds { lo: [0.0, -20.0, t3.0], hi: [100.0 / x_max.max(1e-12), 20.0, t3.1] }],
            CurveLaw::Logarithmic => {
                vec![Bounds { lo: [0.0, -x_min + 1e-6, t3.0], hi: [100.0, 10.0 * x_max.max(1.0), t3.1] }]
            }
            CurveLaw::AlgebraicRoot => vec![Bounds { lo: [0.5, 0.05, t3.0], hi: [100.0, 10.0, t3.1] }],
        }
    }
}

impl fmt::Display for CurveLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CurveLaw {
    type Err = CurveError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "power" => Ok(CurveLaw::Power),
            "arctan" => Ok(CurveLaw::Arctan),
            "logarithmic" | "log" => Ok(CurveLaw::Logarithmic),
            "algebraic_root" | "algebraic" => Ok(CurveLaw::AlgebraicRoot),
            _ => Err(CurveError::UnknownLaw(s.to_string())),
        }
    }
}

/// A learning-curve point: data amount `x` and performance `y` in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: f64,
    pub y: f64,
    /// Unit of `x`: cases, ROI count, ROI volume...
    #[serde(default = "default_unit")]
    pub unit_tag: String,
}

fn default_unit() -> String {
    "cases".to_string()
}

impl Observation {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y, unit_tag: default_unit() }
    }

    /// From a DSC given as a fraction in `[0, 1]`.
    pub fn from_fraction(x: f64, dsc: f64) -> Self {
        Self::new(x, dsc * 100.0)
    }

    fn validate(&self, index: usize) -> Result<(), CurveError> {
        if !(self.x.is_finite() && self.x > 0.0) {
            return Err(CurveError::InvalidObservation { index, reason: format!("x = {} must be > 0", self.x) });
        }
        if !(0.0..=100.0).contains(&self.y) {
            return Err(CurveError::InvalidObservation { index, reason: format!("y = {} must lie in [0, 100]", self.y) });
        }
        Ok(())
    }
}

/// Parse observations CSV with header `x,y,unit_tag`.
pub fn read_observations_csv(text: &str) -> Result<Vec<Observation>, CurveError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| CurveError::Parse(e.to_string()))?.clone();
    for col in ["x", "y", "unit_tag"] {
        if !headers.iter().any(|h| h == col) {
            return Err(CurveError::Parse(format!("missing required column {col:?}")));
        }
    }
    let obs: Vec<Observation> = rdr
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e: csv::Error| CurveError::Parse(e.to_string()))?;
    for (i, o) in obs.iter().enumerate() {
        o.validate(i)?;
    }
    Ok(obs)
}

/// Formula value with the reporting clamp to `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub raw: f64,
    pub clamped: f64,
}

pub fn evaluate(law: CurveLaw, theta: &Params, n: f64) -> Result<Evaluation, CurveError> {
    if !(n > 0.0) {
        return Err(CurveError::BadInversion(format!("data amount n = {n} must be > 0")));
    }
    let raw = law.eval(theta, n);
    if !raw.is_finite() {
        return Err(CurveError::NonFinite { law, n, theta: *theta });
    }
    Ok(Evaluation { raw, clamped: raw.clamp(0.0, 100.0) })
}

/// Outcome of one multi-start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartDiagnostic {
    pub index: usize,
    pub initial: Params,
    pub theta: Option<Params>,
    pub rmse: Option<f64>,
    pub converged: bool,
    pub monotone: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub seed: u64,
    pub n_starts: usize,
    pub bounds: Vec<([f64; 3], [f64; 3])>,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub law: CurveLaw,
    pub theta: Params,
    /// Root-mean-square residual in percent.
    pub rmse: f64,
    pub converged: bool,
    pub n_observations: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub config: FitConfig,
    pub starts: Vec<StartDiagnostic>,
}

impl FitResult {
    pub fn eval(&self, n: f64) -> f64 {
        self.law.eval(&self.theta, n)
    }
}

/// True when `law` is non-decreasing over `[lo, hi]` on a log-spaced grid.
fn is_monotone(law: CurveLaw, theta: &Params, lo: f64, hi: f64) -> bool {
    const POINTS: usize = 256;
    let (a, b) = (lo.ln(), hi.ln());
    let mut prev = f64::NEG_INFINITY;
    for i in 0..POINTS {
        let n = (a + (b - a) * i as f64 / (POINTS - 1) as f64).exp();
        let v = law.eval(theta, n);
        if !v.is_finite() || v < prev - 1e-9 * (1.0 + prev.abs()) {
            return false;
        }
        prev = v;
    }
    true
}

fn check_observations(obs: &[Observation]) -> Result<(f64, f64), CurveError> {
    if obs.len() < 4 {
        return Err(CurveError::TooFewObservations { needed: 4, got: obs.len() });
    }
    for (i, o) in obs.iter().enumerate() {
        o.validate(i)?;
    }
    let x_min = obs.iter().map(|o| o.x).fold(f64::INFINITY, f64::min);
    let x_max = obs.iter().map(|o| o.x).fold(f64::NEG_INFINITY, f64::max);
    if x_min == x_max {
        return Err(CurveError::DegenerateX);
    }
    Ok((x_min, x_max))
}

/// Fit with [`DEFAULT_STARTS`] multi-starts.
pub fn fit(obs: &[Observation], law: CurveLaw, seed: u64) -> Result<FitResult, CurveError> {
    fit_with_starts(obs, law, seed, DEFAULT_STARTS)
}

/// Least-squares fit from `n_starts` seeded starting points drawn uniformly
/// over the law's bounds (cycling through bound orientations). Start `k`
/// uses the stream `(seed, law, k)`. The lowest-RMSE start that converged
/// to a monotone curve wins.
pub fn fit_with_starts(obs: &[Observation], law: CurveLaw, seed: u64, n_starts: usize) -> Result<FitResult, CurveError> {
    let (x_min, x_max) = check_observations(obs)?;
    let xs: Vec<f64> = obs.iter().map(|o| o.x).collect();
    let ys: Vec<f64> = obs.iter().map(|o| o.y).collect();
    let boxes = law.bounds(x_min, x_max);
    let opts = LmOptions::default();
    let residual = |p: &Params, out: &mut [f64]| {
        for (o, (&x, &y)) in out.iter_mut().zip(xs.iter().zip(&ys)) {
            *o = law.eval(p, x) - y;
            if !o.is_finite() {
                return false;
            }
        }
        true
    };

    let mut starts = Vec::with_capacity(n_starts);
    let mut best: Option<(f64, Params)> = None;
    for k in 0..n_starts {
        let b = &boxes[k % boxes.len()];
        let mut s = rng::stream(seed, &[rng::tag(law.name()), k as u64]);
        let initial = [0, 1, 2].map(|i| s.random_range(b.lo[i]..=b.hi[i]));
        let mut diag = StartDiagnostic { index: k, initial, theta: None, rmse: None, converged: false, monotone: false, iterations: 0 };
        if let Some(out) = lsq::minimize(residual, xs.len(), initial, b, &opts) {
            let rmse = (out.cost / xs.len() as f64).sqrt();
            diag.theta = Some(out.params);
            diag.rmse = Some(rmse);
            diag.converged = out.converged;
            diag.iterations = out.iterations;
            diag.monotone = is_monotone(law, &out.params, x_min, 100.0 * x_max);
            if diag.converged && diag.monotone && best.is_none_or(|(r, _)| rmse < r) {
                best = Some((rmse, out.params));
            }
        }
        starts.push(diag);
    }
    let config = FitConfig {
        seed,
        n_starts,
        bounds: boxes.iter().map(|b| (b.lo, b.hi)).collect(),
        max_iterations: opts.max_iterations,
    };
    match best {
        Some((rmse, theta)) => Ok(FitResult {
            law,
            theta,
            rmse,
            converged: true,
            n_observations: obs.len(),
            x_min,
            x_max,
            config,
            starts,
        }),
        None => Err(CurveError::FitFailed { law, diagnostics: starts }),
    }
}

/// Where a fitted curve meets a target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Crossing {
    /// `n` is the continuous crossing; `required` rounds it up to a whole
    /// data amount. `already_met` means the curve is at or above target at
    /// the smallest observed amount, and `n` is that amount.
    Reached { n: f64, required: u64, already_met: bool },
    /// The curve stays below target up to the search cap. `supremum` is the
    /// largest value the curve attains (its asymptote when finite).
    Unreachable { supremum: f64, asymptote: Option<f64> },
}

impl Crossing {
    pub fn required(&self) -> Option<u64> {
        match self {
            Crossing::Reached { required, .. } => Some(*required),
            Crossing::Unreachable { .. } => None,
        }
    }
}

/// Smallest `n` in `[x_min, n_max]` where the fitted curve reaches `target`
/// (percent), by bisection on the monotone curve.
pub fn invert(fit: &FitResult, target: f64, n_max: f64) -> Result<Crossing, CurveError> {
    if !(target > 0.0 && target < 100.0) {
        return Err(CurveError::BadInversion(format!("target {target} must lie in (0, 100)")));
    }
    if !(n_max > fit.x_max) {
        return Err(CurveError::BadInversion(format!("n_max {n_max} must exceed the largest observed x {}", fit.x_max)));
    }
    let f = |n: f64| fit.eval(n);
    let mut lo = fit.x_min;
    if f(lo) >= target {
        return Ok(Crossing::Reached { n: lo, required: lo.ceil() as u64, already_met: true });
    }
    let mut hi = n_max;
    let top = f(hi);
    if !(top >= target) {
        let asymptote = fit.law.asymptote(&fit.theta);
        return Ok(Crossing::Unreachable { supremum: asymptote.unwrap_or(top), asymptote });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-12 * hi {
            break;
        }
        if f(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Crossing::Reached { n: hi, required: required_amount(hi), already_met: false })
}

/// Whole data amount covering a continuous crossing; tolerates the last
/// bits of bisection error so 74.00000000001 does not become 75.
fn required_amount(n: f64) -> u64 {
    let r = n.round();
    if (n - r).abs() <= 1e-9 * n.max(1.0) {
        r as u64
    } else {
        n.ceil() as u64
    }
}

/// Closed-form crossing, when the law admits one and the target lies below
/// its asymptote.
pub fn closed_form_crossing(law: CurveLaw, theta: &Params, target: f64) -> Option<f64> {
    let [t1, t2, t3] = *theta;
    let n = match law {
        CurveLaw::Power => {
            let base = (target - t3) / t1;
            if !(base > 0.0) || t2 == 0.0 {
                return None;
            }
            base.powf(1.0 / t2)
        }
        CurveLaw::Logarithmic => {
            if t1 <= 0.0 {
                return None;
            }
            ((target - t3) / t1).exp() - t2
        }
        CurveLaw::Arctan => {
            let angle = (target - t3) * std::f64::consts::PI / 200.0;
            if t1 <= 0.0 || angle.abs() >= std::f64::consts::FRAC_PI_2 {
                return None;
            }
            (angle.tan() - t2) / (t1 * std::f64::consts::FRAC_PI_2)
        }
        CurveLaw::AlgebraicRoot => {
            let y = (target - t3) / 100.0;
            let rest = 1.0 - (t1 * y).abs().powf(t2);
            if y <= 0.0 || rest <= 0.0 {
                return None;
            }
            y / rest.powf(1.0 / t2)
        }
    };
    (n.is_finite() && n > 0.0).then_some(n)
}

/// One cell of a prefix prediction table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub prefix: usize,
    pub law: CurveLaw,
    pub theta: Option<Params>,
    pub rmse: Option<f64>,
    pub crossing: Option<Crossing>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTable {
    pub schema: String,
    pub target: f64,
    pub seed: u64,
    pub n_max_factor: f64,
    pub rows: Vec<PredictionRow>,
}

/// Search cap for inversion, as a multiple of the largest observed amount.
pub const DEFAULT_N_MAX_FACTOR: f64 = 100.0;

/// Seed used for the `(law, prefix)` cell of a prediction table.
pub fn cell_seed(seed: u64, law: CurveLaw, prefix: usize) -> u64 {
    rng::derive_key(seed, &[rng::tag(law.name()), prefix as u64])
}

/// Fit each law on the first `k` observations for every `k` in
/// `prefix_sizes` and invert at `target`. Cell failures are recorded in the
/// row rather than aborting the table.
pub fn predict_from_prefix(
    obs: &[Observation],
    laws: &[CurveLaw],
    target: f64,
    prefix_sizes: &[usize],
    seed: u64,
) -> Result<PredictionTable, CurveError> {
    if let Some(&k) = prefix_sizes.iter().find(|&&k| k > obs.len()) {
        return Err(CurveError::TooFewObservations { needed: k, got: obs.len() });
    }
    let mut rows = Vec::new();
    for &k in prefix_sizes {
        for &law in laws {
            let prefix = &obs[..k];
            let mut row = PredictionRow { prefix: k, law, theta: None, rmse: None, crossing: None, error: None };
            match fit(prefix, law, cell_seed(seed, law, k)) {
                Ok(f) => {
                    row.theta = Some(f.theta);
                    row.rmse = Some(f.rmse);
                    match invert(&f, target, DEFAULT_N_MAX_FACTOR * f.x_max) {
                        Ok(c) => row.crossing = Some(c),
                        Err(e) => row.error = Some(e.to_string()),
                    }
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            rows.push(row);
        }
    }
    Ok(PredictionTable { schema: PREDICTIONS_SCHEMA.to_string(), target, seed, n_max_factor: DEFAULT_N_MAX_FACTOR, rows })
}

/// CSV with columns `prefix,law,theta1,theta2,theta3,rmse,status,n,required,supremum,error`.
pub fn predictions_csv(table: &PredictionTable) -> String {
    let mut out = String::from("prefix,law,theta1,theta2,theta3,rmse,status,n,required,supremum,error\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &table.rows {
        let th = r.theta.map(|t| t.map(|v| v.to_string())).unwrap_or_default();
        let (status, n, req, sup) = match r.crossing {
            Some(Crossing::Reached { n, required, already_met }) => {
                (if already_met { "already_met" } else { "reached" }, n.to_string(), required.to_string(), String::new())
            }
            Some(Crossing::Unreachable { supremum, .. }) => ("unreachable", String::new(), String::new(), supremum.to_string()),
            None => ("failed", String::new(), String::new(), String::new()),
        };
        let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        out.push_str(&format!(
            "{},{},{},{},{},{},{status},{n},{req},{sup},{err}\n",
            r.prefix,
            r.law,
            th[0],
            th[1],
            th[2],
            opt(r.rmse)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generate(law: CurveLaw, theta: Params, xs: impl Iterator<Item = f64>) -> Vec<Observation> {
        xs.map(|x| Observation::new(x, law.eval(&theta, x))).collect()
    }

    fn fives() -> impl Iterator<Item = f64> {
        (1..=20).map(|i| 5.0 * i as f64)
    }

    #[test]
    fn evaluate_examples() {
        for n in [1.0, 7.0, 300.0] {
            assert_eq!(evaluate(CurveLaw::Logarithmic, &[0.0, 3.0, 70.0], n).unwrap().raw, 70.0);
        }
        assert!((evaluate(CurveLaw::Power, &[-50.0, -1.0, 90.0], 10.0).unwrap().raw - 85.0).abs() < 1e-12);
        // 100 n / (1 + n/60) at n = 60 is 3000; the reporting clamp caps it.
        let e = evaluate(CurveLaw::AlgebraicRoot, &[1.0 / 60.0, 1.0, 0.0], 60.0).unwrap();
        assert!((e.raw - 3000.0).abs() < 1e-9);
        assert_eq!(e.clamped, 100.0);
        assert!(matches!(
            evaluate(CurveLaw::Logarithmic, &[1.0, -10.0, 0.0], 5.0),
            Err(CurveError::NonFinite { .. })
        ));
        assert!(evaluate(CurveLaw::Power, &[1.0, 1.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn arctan_and_algebraic_asymptotes() {
        let th = [0.05, 0.0, -5.0];
        assert_eq!(CurveLaw::Arctan.asymptote(&th), Some(95.0));
        assert!((CurveLaw::Arctan.eval(&th, 1e9) - 95.0).abs() < 1e-5);
        let th = [1.25, 0.7, 0.0];
        assert_eq!(CurveLaw::AlgebraicRoot.asymptote(&th), Some(80.0));
        assert!((CurveLaw::AlgebraicRoot.eval(&th, 1e12) - 80.0).abs() < 1e-3);
    }

    #[test]
    fn preconditions() {
        let obs = generate(CurveLaw::Logarithmic, [8.0, 5.0, 40.0], [5.0, 10.0, 15.0].into_iter());
        assert_eq!(fit(&obs, CurveLaw::Logarithmic, 0), Err(CurveError::TooFewObservations { needed: 4, got: 3 }));
        let same = vec![Observation::new(5.0, 50.0); 5];
        assert_eq!(fit(&same, CurveLaw::Power, 0), Err(CurveError::DegenerateX));
        let bad = vec![Observation::new(-1.0, 50.0); 5];
        assert!(matches!(fit(&bad, CurveLaw::Power, 0), Err(CurveError::InvalidObservation { index: 0, .. })));
    }

    #[test]
    fn noiseless_logarithmic_recovery() {
        let truth = [8.0, 5.0, 40.0];
        let obs = generate(CurveLaw::Logarithmic, truth, fives());
        let f = fit(&obs, CurveLaw::Logarithmic, 1).unwrap();
        assert!(f.rmse < 1e-6, "rmse {}", f.rmse);
        assert!(f.starts.len() >= 16);
        for s in f.starts.iter().filter(|s| s.converged && s.monotone) {
            assert!(f.rmse <= s.rmse.unwrap());
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let obs = generate(CurveLaw::Power, [-60.0, -0.5, 95.0], fives());
        assert_eq!(fit(&obs, CurveLaw::Power, 9), fit(&obs, CurveLaw::Power, 9));
    }

    #[test]
    fn logarithmic_inversion_example() {
        let obs = generate(CurveLaw::Logarithmic, [8.0, 5.0, 40.0], fives());
        let f = fit(&obs, CurveLaw::Logarithmic, 1).unwrap();
        let exact = (35.0f64 / 8.0).exp() - 5.0;
        match invert(&f, 75.0, 1e4).unwrap() {
            Crossing::Reached { n, required, already_met } => {
                assert!(!already_met);
                assert!((n - exact).abs() / exact < 1e-6, "{n} vs {exact}");
                assert_eq!(required, exact.ceil() as u64);
            }
            other => panic!("{other:?}"),
        }
    }

    fn manual_fit(law: CurveLaw, theta: Params, x_min: f64, x_max: f64) -> FitResult {
        FitResult {
            law,
            theta,
            rmse: 0.0,
            converged: true,
            n_observations: 4,
            x_min,
            x_max,
            config: FitConfig { seed: 0, n_starts: 0, bounds: vec![], max_iterations: 0 },
            starts: vec![],
        }
    }

    #[test]
    fn inversion_boundaries() {
        let f = manual_fit(CurveLaw::Logarithmic, [8.0, 5.0, 40.0], 5.0, 100.0);
        let at_min = f.eval(5.0);
        assert_eq!(invert(&f, at_min - 1.0, 1e4).unwrap(), Crossing::Reached { n: 5.0, required: 5, already_met: true });

        let f = manual_fit(CurveLaw::Power, [-50.0, -0.5, 95.0], 5.0, 100.0);
        match invert(&f, 99.9, 1e4).unwrap() {
            Crossing::Unreachable { supremum, asymptote } => {
                assert_eq!(asymptote, Some(95.0));
                assert_eq!(supremum, 95.0);
            }
            other => panic!("{other:?}"),
        }
        assert!(invert(&f, 100.0, 1e4).is_err());
        assert!(invert(&f, 90.0, 50.0).is_err());
    }

    #[test]
    fn closed_forms_match_bisection() {
        let cases = [
            (CurveLaw::Power, [-60.0, -0.5, 95.0], 85.0),
            (CurveLaw::Logarithmic, [8.0, 5.0, 40.0], 75.0),
            (CurveLaw::Arctan, [0.02, -0.5, -5.0], 70.0),
            (CurveLaw::AlgebraicRoot, [1.25, 0.3, -20.0], 50.0),
        ];
        for (law, th, target) in cases {
            let f = manual_fit(law, th, 1.0, 100.0);
            let bis = match invert(&f, target, 1e6).unwrap() {
                Crossing::Reached { n, .. } => n,
                other => panic!("{law}: {other:?}"),
            };
            let cf = closed_form_crossing(law, &th, target).unwrap();
            assert!((bis - cf).abs() / cf < 5e-3, "{law}: {bis} vs {cf}");
            assert!((law.eval(&th, cf) - target).abs() < 1e-8);
        }
    }

    #[test]
    fn round_trip_on_integer_domain() {
        let f = manual_fit(CurveLaw::Power, [-60.0, -0.5, 95.0], 1.0, 100.0);
        for target in [70.0, 80.0, 88.0, 90.0] {
            let req = invert(&f, target, 1e6).unwrap().required().unwrap() as f64;
            assert!(f.eval(req) >= target);
            assert!(f.eval(req - 1.0) < target);
        }
    }

    #[test]
    fn prefix_table_cells() {
        let obs = generate(CurveLaw::Logarithmic, [8.0, 5.0, 40.0], fives());
        let t = predict_from_prefix(&obs, &[CurveLaw::Logarithmic], 75.0, &[4, 10, 20], 3).unwrap();
        assert_eq!(t.rows.len(), 3);
        let exact = (35.0f64 / 8.0).exp() - 5.0;
        for r in &t.rows {
            let Some(Crossing::Reached { n, .. }) = r.crossing else { panic!("{r:?}") };
            assert!((n - exact).abs() / exact < 0.01, "prefix {} -> {n}", r.prefix);
        }
        let direct = fit(&obs, CurveLaw::Logarithmic, cell_seed(3, CurveLaw::Logarithmic, 20)).unwrap();
        assert_eq!(t.rows[2].theta, Some(direct.theta));
        assert_eq!(t.rows[2].crossing, Some(invert(&direct, 75.0, 100.0 * direct.x_max).unwrap()));

        let t = predict_from_prefix(&obs, &[CurveLaw::Power], 75.0, &[3], 3).unwrap();
        assert!(t.rows[0].error.as_deref().unwrap().contains("at least 4"));
        assert!(predict_from_prefix(&obs, &[CurveLaw::Power], 75.0, &[21], 3).is_err());
        let csv = predictions_csv(&t);
        assert!(csv.lines().nth(1).unwrap().contains(",failed,"));
    }

    #[test]
    fn observation_csv_parsing() {
        let obs = read_observations_csv("x,y,unit_tag\n5,60.5,cases\n10, 70 ,cases\n").unwrap();
        assert_eq!(obs, vec![Observation::new(5.0, 60.5), Observation::new(10.0, 70.0)]);
        assert!(read_observations_csv("x,y\n5,60\n").unwrap_err().to_string().contains("unit_tag"));
        assert!(matches!(read_observations_csv("x,y,unit_tag\n5,160,cases\n"), Err(CurveError::InvalidObservation { .. })));
        assert!(read_observations_csv("x,y,unit_tag\n5,abc,cases\n").is_err());
        assert_eq!("log".parse::<CurveLaw>().unwrap(), CurveLaw::Logarithmic);
        assert!("cubic".parse::<CurveLaw>().is_err());
    }
}
