use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use segplan::curves::CurveLaw;
use segplan::minbat::{MarkovSchedule, MinbatConfig};
use segplan::volumes::{read_mask, MaskVolume};
use serde::Serialize;

use crate::CliError;

pub mod curves;
pub mod minbat;
pub mod pipeline;
pub mod reps;
pub mod stats;
pub mod synth;
pub mod theory;

pub(crate) struct NamedMask {
    pub name: String,
    pub mask: MaskVolume,
}

fn is_nifti(path: &Path) -> bool {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    name.ends_with(".nii") || name.ends_with(".nii.gz")
}

fn mask_name(path: &Path) -> String {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("mask");
    name.trim_end_matches(".gz").trim_end_matches(".nii").to_string()
}

/// Expand directories to their NIfTI files (sorted by file name) and read
/// every mask. Explicit file arguments keep their command-line order.
pub(crate) fn load_masks(paths: &[PathBuf]) -> Result<Vec<NamedMask>, CliError> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| CliError::Runtime(format!("cannot list {}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && is_nifti(f))
                .collect();
            found.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
            files.extend(found);
        } else if p.exists() {
            files.push(p.clone());
        } else {
            return Err(CliError::Usage(format!("no such file or directory: {}", p.display())));
        }
    }
    if files.is_empty() {
        return Err(CliError::Usage("no .nii or .nii.gz masks found".into()));
    }
    files
        .into_iter()
        .map(|f| {
            let mask = read_mask(&f)?;
            Ok(NamedMask { name: mask_name(&f), mask })
        })
        .collect()
}

/// Perturbation settings shared by `minbat` and `pipeline`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct PerturbArgs {
    /// Perturbation schedule: standard2 or wide3.
    #[arg(long, default_value = "standard2")]
    pub profile: String,

    /// Perturbations per case for the per-case DSC distribution.
    #[arg(long, default_value_t = 10)]
    pub trials: usize,

    /// Random draws per subsample size.
    #[arg(long, default_value_t = 10)]
    pub subsample_trials: usize,

    /// Added to the dataset mean DSC before rounding up.
    #[arg(long, default_value_t = 0.005)]
    pub margin: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl PerturbArgs {
    /// Explicit `sizes` are used as given; the default ladder is cut to the
    /// dataset size.
    pub(crate) fn config(&self, sizes: Option<&[usize]>, n_cases: usize) -> Result<MinbatConfig, CliError> {
        let defaults = MinbatConfig::default();
        let subsample_sizes = match sizes {
            Some(s) => s.to_vec(),
            None => defaults.subsample_sizes.iter().copied().filter(|&s| s <= n_cases).collect(),
        };
        Ok(MinbatConfig {
            schedule: MarkovSchedule::profile(&self.profile)?,
            trials_per_case: self.trials,
            subsample_sizes,
            trials_per_subsample: self.subsample_trials,
            margin: self.margin,
            master_seed: self.seed,
        })
    }
}

/// `all` or a list of law names, deduplicated in the given order.
pub(crate) fn parse_laws(names: &[String]) -> Result<Vec<CurveLaw>, CliError> {
    let mut laws = Vec::new();
    for n in names {
        let chosen: Vec<CurveLaw> = if n.eq_ignore_ascii_case("all") { CurveLaw::ALL.to_vec() } else { vec![n.parse()?] };
        for l in chosen {
            if !laws.contains(&l) {
                laws.push(l);
            }
        }
    }
    if laws.is_empty() {
        return Err(CliError::Usage("no curve laws selected".into()));
    }
    Ok(laws)
}

/// Target in percent. Values up to 1 are read as DSC fractions.
pub(crate) fn target_percent(t: f64) -> Result<f64, CliError> {
    let p = if t <= 1.0 { t * 100.0 } else { t };
    if !(p > 0.0 && p < 100.0) {
        return Err(CliError::Usage(format!("target {t} must be a fraction in (0, 1) or a percentage in (1, 100)")));
    }
    Ok(p)
}
