use std::path::PathBuf;

use clap::Args;
use segplan::curves::{Crossing, CurveLaw, DEFAULT_N_MAX_FACTOR};
use segplan::minbat::estimate_threshold;
use serde::Serialize;

use super::curves::{fit_laws, read_observations, LawFit};
use super::stats::summarize;
use super::{load_masks, parse_laws, PerturbArgs};
use crate::output::{Header, Output};
use crate::CliError;

#[derive(Debug, Args, Serialize)]
pub struct PipelineArgs {
    /// Directory (or file) of ground-truth masks.
    pub masks: PathBuf,

    /// Learning-curve observations CSV (x,y,unit_tag; y in percent).
    pub observations: Option<PathBuf>,

    #[command(flatten)]
    #[serde(flatten)]
    pub perturb: PerturbArgs,

    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub laws: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Sufficiency {
    Known(bool),
    Unknown(&'static str),
}

#[derive(Debug, Serialize)]
struct DatasetSummary {
    cases: usize,
    /// Empty masks are reported and left out of the target estimate.
    excluded_empty: Vec<String>,
    mean_ratio_c: Option<f64>,
    mean_dsc: f64,
}

#[derive(Debug, Serialize)]
struct Verdict {
    /// Recommended DSC target as a fraction.
    target: f64,
    best_law: Option<CurveLaw>,
    required_n: Option<u64>,
    current_n: Option<f64>,
    sufficient: Sufficiency,
    dataset: DatasetSummary,
    fits: Vec<LawFit>,
}

pub fn run(args: &PipelineArgs, out: &Output) -> Result<(), CliError> {
    let laws = parse_laws(&args.laws)?;
    let masks = load_masks(std::slice::from_ref(&args.masks))?;
    let stats = summarize(&masks);
    for w in &stats.warnings {
        eprintln!("warning: {w}");
    }
    let kept: Vec<_> = masks.iter().zip(&stats.cases).filter(|(_, s)| !s.empty).map(|(m, _)| m.mask.clone()).collect();
    if kept.is_empty() {
        return Err(CliError::Usage("every mask is empty".into()));
    }
    let config = args.perturb.config(None, kept.len())?;
    let report = estimate_threshold(&kept, &config)?;
    let target = report.recommended_target;

    let obs = match &args.observations {
        Some(p) => read_observations(p)?,
        None => Vec::new(),
    };
    let fits = if obs.len() >= 4 {
        fit_laws(&obs, &laws, Some(target * 100.0), args.perturb.seed, DEFAULT_N_MAX_FACTOR)
    } else {
        if !obs.is_empty() {
            eprintln!("warning: {} observations; at least 4 are needed to fit a curve", obs.len());
        }
        Vec::new()
    };
    let current_n = obs.iter().map(|o| o.x).reduce(f64::max);
    let best = fits
        .iter()
        .filter(|f| f.crossing.is_some())
        .min_by(|a, b| a.rmse.unwrap_or(f64::INFINITY).total_cmp(&b.rmse.unwrap_or(f64::INFINITY)));
    let (required_n, sufficient) = match (best.and_then(|f| f.crossing), current_n) {
        (Some(Crossing::Reached { required, .. }), Some(cur)) => (Some(required), Sufficiency::Known(required as f64 <= cur)),
        (Some(Crossing::Unreachable { .. }), _) => (None, Sufficiency::Known(false)),
        _ => (None, Sufficiency::Unknown("unknown")),
    };

    let verdict = Verdict {
        target,
        best_law: best.map(|f| f.law),
        required_n,
        current_n,
        sufficient,
        dataset: DatasetSummary {
            cases: masks.len(),
            excluded_empty: stats.cases.iter().filter(|c| c.empty).map(|c| c.name.clone()).collect(),
            mean_ratio_c: stats.aggregate.mean_ratio_c,
            mean_dsc: report.dataset_mean_dsc,
        },
        fits,
    };
    let header = Header::new("pipeline", args, Some(args.perturb.seed));
    out.json("pipeline_verdict.json", &header, &verdict)?;
    let law = verdict.best_law.map(|l| l.name()).unwrap_or("none");
    match verdict.sufficient {
        Sufficiency::Known(s) => println!(
            "target {target:.3}; best law {law}; required {}; current {}; sufficient: {s}",
            required_n.map(|n| n.to_string()).unwrap_or_else(|| "unreachable".into()),
            current_n.map(|n| n.to_string()).unwrap_or_default(),
        ),
        Sufficiency::Unknown(_) => println!("target {target:.3}; sufficiency unknown without learning-curve observations"),
    }
    Ok(())
}
