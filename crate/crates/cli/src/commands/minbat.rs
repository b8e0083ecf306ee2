use std::path::PathBuf;

use clap::Args;
use segplan::minbat::{estimate_threshold, per_size_csv, MinbatReport};
use serde::Serialize;

use super::{load_masks, PerturbArgs};
use crate::output::{Format, Header, Output};
use crate::CliError;

#[derive(Debug, Args, Serialize)]
pub struct MinbatArgs {
    /// Mask files or directories of masks.
    #[arg(required = true)]
    pub masks: Vec<PathBuf>,

    #[command(flatten)]
    #[serde(flatten)]
    pub perturb: PerturbArgs,

    /// Subsample sizes, comma separated. Defaults to 5,10,20,30,50,75,100
    /// cut to the dataset size.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,

    /// Print only the recommended target; write nothing.
    #[arg(long)]
    pub target_only: bool,

    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Serialize)]
struct NamedReport<'a> {
    case_names: Vec<&'a str>,
    #[serde(flatten)]
    report: &'a MinbatReport,
}

pub fn run(args: &MinbatArgs, out: &Output) -> Result<(), CliError> {
    let masks = load_masks(&args.masks)?;
    let config = args.perturb.config(args.sizes.as_deref(), masks.len())?;
    let volumes: Vec<_> = masks.iter().map(|m| m.mask.clone()).collect();
    let report = estimate_threshold(&volumes, &config).map_err(|e| match e {
        segplan::minbat::MinbatError::EmptyCase { index } => {
            CliError::Usage(format!("{}: mask is empty; remove it from the dataset", masks[index].name))
        }
        other => other.into(),
    })?;
    if args.target_only {
        println!("{:.3}", report.recommended_target);
        return Ok(());
    }
    let header = Header::new("minbat", args, Some(args.perturb.seed));
    let body = NamedReport { case_names: masks.iter().map(|m| m.name.as_str()).collect(), report: &report };
    if args.format.json() {
        out.json("minbat_report.json", &header, &body)?;
    }
    if args.format.csv() {
        out.csv("minbat_per_size.csv", &header, &per_size_csv(&report))?;
    }
    println!(
        "{} cases: mean DSC {:.4}, mean S/V {:.4}, recommended target {:.3}",
        masks.len(),
        report.dataset_mean_dsc,
        report.dataset_mean_sv,
        report.recommended_target
    );
    if report.degenerate_perturbations > 0 {
        eprintln!("warning: {} perturbations erased their mask entirely", report.degenerate_perturbations);
    }
    Ok(())
}
