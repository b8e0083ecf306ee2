use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use segplan::curves::{
    self, closed_form_crossing, invert, predict_from_prefix, predictions_csv, Crossing, CurveError, CurveLaw, Observation,
    DEFAULT_N_MAX_FACTOR,
};
use serde::Serialize;

use super::{parse_laws, target_percent};
use crate::output::{Format, Header, Output};
use crate::CliError;

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// Observations CSV with header x,y,unit_tag (y in percent).
    pub observations: PathBuf,

    /// Laws to fit, comma separated, or `all`.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub laws: Vec<String>,

    /// Target performance to invert at. Values up to 1 are DSC fractions,
    /// larger values percent.
    #[arg(long)]
    pub target: Option<f64>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Inversion search cap as a multiple of the largest observed x.
    #[arg(long, default_value_t = DEFAULT_N_MAX_FACTOR)]
    pub n_max_factor: f64,

    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    /// Observations CSV with header x,y,unit_tag (y in percent).
    pub observations: PathBuf,

    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub laws: Vec<String>,

    /// Target performance. Values up to 1 are DSC fractions, larger values
    /// percent.
    #[arg(long)]
    pub target: f64,

    /// Prefix lengths to fit on. Defaults to every length from 4 up.
    #[arg(long, value_delimiter = ',')]
    pub prefixes: Option<Vec<usize>>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

pub(crate) fn read_observations(path: &Path) -> Result<Vec<Observation>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    curves::read_observations_csv(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// One law fitted to the full observation set.
#[derive(Debug, Clone, Serialize)]
pub(crate) struct LawFit {
    pub law: CurveLaw,
    pub theta: Option<[f64; 3]>,
    pub rmse: Option<f64>,
    pub converged: Option<bool>,
    pub crossing: Option<Crossing>,
    /// Analytic crossing for comparison with the numerical one.
    pub closed_form_n: Option<f64>,
    pub error: Option<String>,
}

pub(crate) fn fit_laws(obs: &[Observation], laws: &[CurveLaw], target: Option<f64>, seed: u64, n_max_factor: f64) -> Vec<LawFit> {
    laws.iter()
        .map(|&law| {
            let mut row = LawFit { law, theta: None, rmse: None, converged: None, crossing: None, closed_form_n: None, error: None };
            match curves::fit(obs, law, curves::cell_seed(seed, law, obs.len())) {
                Ok(f) => {
                    row.theta = Some(f.theta);
                    row.rmse = Some(f.rmse);
                    row.converged = Some(f.converged);
                    if let Some(t) = target {
                        row.closed_form_n = closed_form_crossing(law, &f.theta, t);
                        match invert(&f, t, n_max_factor * f.x_max) {
                            Ok(c) => row.crossing = Some(c),
                            Err(e) => row.error = Some(e.to_string()),
                        }
                    }
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect()
}

#[derive(Serialize)]
struct FitReport<'a> {
    target_percent: Option<f64>,
    n_observations: usize,
    fits: &'a [LawFit],
}

fn fits_csv(fits: &[LawFit]) -> String {
    let mut s = String::from("law,theta1,theta2,theta3,rmse,status,n,required,supremum,error\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for f in fits {
        let th = f.theta.map(|t| t.map(|v| v.to_string())).unwrap_or_default();
        let (status, n, req, sup) = match f.crossing {
            Some(Crossing::Reached { n, required, already_met }) => {
                (if already_met { "already_met" } else { "reached" }, n.to_string(), required.to_string(), String::new())
            }
            Some(Crossing::Unreachable { supremum, .. }) => ("unreachable", String::new(), String::new(), supremum.to_string()),
            None if f.theta.is_some() => ("fitted", String::new(), String::new(), String::new()),
            None => ("failed", String::new(), String::new(), String::new()),
        };
        let err = f.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        s.push_str(&format!("{},{},{},{},{},{status},{n},{req},{sup},{err}\n", f.law, th[0], th[1], th[2], opt(f.rmse)));
    }
    s
}

fn describe(c: &Crossing) -> String {
    match c {
        Crossing::Reached { required, already_met: true, .. } => format!("already met at {required}"),
        Crossing::Reached { required, .. } => format!("reached at {required}"),
        Crossing::Unreachable { supremum, .. } => format!("unreachable (curve tops out at {supremum:.3})"),
    }
}

pub fn run_fit(args: &FitArgs, out: &Output) -> Result<(), CliError> {
    let laws = parse_laws(&args.laws)?;
    let target = args.target.map(target_percent).transpose()?;
    if !(args.n_max_factor > 1.0) {
        return Err(CliError::Usage(format!("--n-max-factor {} must exceed 1", args.n_max_factor)));
    }
    let obs = read_observations(&args.observations)?;
    if obs.len() < 4 {
        return Err(CurveError::TooFewObservations { needed: 4, got: obs.len() }.into());
    }
    let fits = fit_laws(&obs, &laws, target, args.seed, args.n_max_factor);
    let header = Header::new("fit", args, Some(args.seed));
    let body = FitReport { target_percent: target, n_observations: obs.len(), fits: &fits };
    out.report("curve_fits", args.format, &header, &body, || fits_csv(&fits))?;
    for f in &fits {
        match (&f.rmse, &f.crossing, &f.error) {
            (Some(r), Some(c), _) => println!("{:<15} rmse {r:.4}  {}", f.law.name(), describe(c)),
            (Some(r), None, None) => println!("{:<15} rmse {r:.4}", f.law.name()),
            (_, _, e) => println!("{:<15} failed: {}", f.law.name(), e.as_deref().unwrap_or("unknown error")),
        }
    }
    if fits.iter().all(|f| f.theta.is_none()) {
        return Err(CliError::Runtime("no law could be fitted".into()));
    }
    Ok(())
}

pub fn run_predict(args: &PredictArgs, out: &Output) -> Result<(), CliError> {
    let laws = parse_laws(&args.laws)?;
    let target = target_percent(args.target)?;
    let obs = read_observations(&args.observations)?;
    if obs.len() < 4 {
        return Err(CurveError::TooFewObservations { needed: 4, got: obs.len() }.into());
    }
    let prefixes = args.prefixes.clone().unwrap_or_else(|| (4..=obs.len()).collect());
    if prefixes.is_empty() {
        return Err(CliError::Usage("--prefixes needs at least one value".into()));
    }
    let table = predict_from_prefix(&obs, &laws, target, &prefixes, args.seed)?;
    let header = Header::new("predict", args, Some(args.seed));
    out.report("curve_predictions", args.format, &header, &table, || predictions_csv(&table))?;
    let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} cells failed; see the error column", table.rows.len());
    }
    Ok(())
}
