//! Achievable-DSC thresholds from randomized boundary perturbation.
//!
//! Each ground-truth mask is pushed through a short Markov chain of random
//! dilations and erosions; the DSC of the perturbed mask against the
//! original measures how much score boundary-level annotation noise alone
//! costs. Averaging over a dataset gives the task's target DSC, and repeated
//! subsampling shows how stable that estimate is at smaller dataset sizes.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morphology::{self, MorphologyError, SurfaceVolumeStats};
use crate::rng::{self, Stream};
use crate::volumes::MaskVolume;

pub const REPORT_SCHEMA: &str = "minbat_report.v1";

#[derive(Debug, Error, PartialEq)]
pub enum MinbatError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("mask is empty; nothing to perturb")]
    EmptyMask,
    #[error("case {index} has an empty mask")]
    EmptyCase { index: usize },
    #[error("subsample size {size} exceeds dataset size {dataset}")]
    SubsampleTooLarge { size: usize, dataset: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown schedule profile {0:?} (expected standard2 or wide3)")]
    UnknownProfile(String),
    #[error(transparent)]
    Morphology(#[from] MorphologyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOp {
    Dilate,
    Erode,
}

/// One randomized morphology step. `probability` is mu1 for dilation and
/// mu2 for erosion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovStep {
    pub op: StepOp,
    pub radius: usize,
    pub probability: f64,
}

impl MarkovStep {
    pub fn dilate(radius: usize, probability: f64) -> Self {
        Self { op: StepOp::Dilate, radius, probability }
    }

    pub fn erode(radius: usize, probability: f64) -> Self {
        Self { op: StepOp::Erode, radius, probability }
    }
}

/// Ordered perturbation steps. An empty schedule is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovSchedule {
    pub steps: Vec<MarkovStep>,
}

impl MarkovSchedule {
    /// Dilate, erode, dilate, erode, all radius 1 with probability 0.5.
    pub fn standard2() -> Self {
        Self {
            steps: vec![
                MarkovStep::dilate(1, 0.5),
                MarkovStep::erode(1, 0.5),
                MarkovStep::dilate(1, 0.5),
                MarkovStep::erode(1, 0.5),
            ],
        }
    }

    /// Up to three voxels of boundary change: radii 2, 2, 1, 1.
    pub fn wide3() -> Self {
        Self {
            steps: vec![
                MarkovStep::dilate(2, 0.5),
                MarkovStep::erode(2, 0.5),
                MarkovStep::dilate(1, 0.5),
                MarkovStep::erode(1, 0.5),
            ],
        }
    }

    pub fn profile(name: &str) -> Result<Self, MinbatError> {
        match name {
            "standard2" => Ok(Self::standard2()),
            "wide3" => Ok(Self::wide3()),
            other => Err(MinbatError::UnknownProfile(other.to_string())),
        }
    }

    pub fn validate(&self) -> Result<(), MinbatError> {
        for (i, s) in self.steps.iter().enumerate() {
            if s.radius == 0 {
                return Err(MinbatError::InvalidConfig(format!("step {i}: radius must be >= 1")));
            }
            if !(0.0..=1.0).contains(&s.probability) {
                return Err(MinbatError::InvalidConfig(format!(
                    "step {i}: probability {} outside [0, 1]",
                    s.probability
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinbatConfig {
    pub schedule: MarkovSchedule,
    pub trials_per_case: usize,
    pub subsample_sizes: Vec<usize>,
    pub trials_per_subsample: usize,
    pub margin: f64,
    pub master_seed: u64,
}

impl Default for MinbatConfig {
    fn default() -> Self {
        Self {
            schedule: MarkovSchedule::standard2(),
            trials_per_case: 10,
            subsample_sizes: vec![5, 10, 20, 30, 50, 75, 100],
            trials_per_subsample: 10,
            margin: 0.005,
            master_seed: 0,
        }
    }
}

impl MinbatConfig {
    pub fn validate(&self) -> Result<(), MinbatError> {
        self.schedule.validate()?;
        if self.trials_per_case == 0 {
            return Err(MinbatError::InvalidConfig("trials_per_case must be >= 1".into()));
        }
        if self.trials_per_subsample == 0 {
            return Err(MinbatError::InvalidConfig("trials_per_subsample must be >= 1".into()));
        }
        if self.subsample_sizes.contains(&0) {
            return Err(MinbatError::InvalidConfig("subsample sizes must be >= 1".into()));
        }
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return Err(MinbatError::InvalidConfig(format!("margin {} must be >= 0", self.margin)));
        }
        Ok(())
    }
}

/// Result of one pass through a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub mask: MaskVolume,
    /// Every voxel was removed by erosion.
    pub degenerate: bool,
}

/// Apply the schedule's steps in order, each drawing from `stream`.
pub fn perturb_mask(mask: &MaskVolume, schedule: &MarkovSchedule, stream: &mut Stream) -> Result<Perturbation, MinbatError> {
    schedule.validate()?;
    if mask.is_blank() {
        return Err(MinbatError::EmptyMask);
    }
    let mut current = mask.clone();
    for step in &schedule.steps {
        current = match step.op {
            StepOp::Dilate => morphology::random_dilate(&current, step.radius, step.probability, stream)?,
            StepOp::Erode => morphology::random_erode(&current, step.radius, step.probability, stream)?,
        };
    }
    let degenerate = current.is_blank();
    Ok(Perturbation { mask: current, degenerate })
}

/// Perturb and score against the original. Annihilated masks score 0.
fn perturbed_dsc(mask: &MaskVolume, schedule: &MarkovSchedule, stream: &mut Stream) -> Result<(f64, bool), MinbatError> {
    let p = perturb_mask(mask, schedule, stream)?;
    let score = morphology::dsc(mask, &p.mask)?.dsc;
    Ok((if p.degenerate { 0.0 } else { score }, p.degenerate))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseDistribution {
    pub dsc: Vec<f64>,
    pub degenerate: usize,
}

impl CaseDistribution {
    pub fn mean(&self) -> f64 {
        mean(&self.dsc)
    }
}

/// `n_trials` independent perturbations of one case. Trial `i` uses the
/// stream derived from `(seed, case_id, i)`.
pub fn case_dsc_distribution(
    mask: &MaskVolume,
    schedule: &MarkovSchedule,
    n_trials: usize,
    seed: u64,
    case_id: u64,
) -> Result<CaseDistribution, MinbatError> {
    if n_trials == 0 {
        return Err(MinbatError::InvalidConfig("n_trials must be >= 1".into()));
    }
    let results: Vec<(f64, bool)> = (0..n_trials as u64)
        .into_par_iter()
        .map(|i| perturbed_dsc(mask, schedule, &mut rng::stream(seed, &[rng::tag("case"), case_id, i])))
        .collect::<Result<_, _>>()?;
    Ok(CaseDistribution {
        degenerate: results.iter().filter(|r| r.1).count(),
        dsc: results.into_iter().map(|r| r.0).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub index: usize,
    pub stats: SurfaceVolumeStats,
    pub dsc_samples: Vec<f64>,
    pub dsc_mean: f64,
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Dataset indices drawn for this trial.
    pub cases: Vec<usize>,
    pub dsc_mean: f64,
    pub sv_mean: f64,
    pub dsc_min: f64,
    pub dsc_max: f64,
    pub degenerate: usize,
}

/// One row of the subsampling table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub size: usize,
    pub dsc_mean: f64,
    pub dsc_sd: f64,
    pub sv_mean: f64,
    pub sv_sd: f64,
    pub trials: Vec<TrialRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinbatReport {
    pub schema: String,
    pub per_case: Vec<CaseRecord>,
    pub per_size: Vec<SizeRow>,
    pub dataset_mean_dsc: f64,
    pub dataset_mean_sv: f64,
    pub recommended_target: f64,
    pub degenerate_perturbations: usize,
    pub config: MinbatConfig,
    /// Each sampled case is perturbed once per subsample trial.
    pub perturbations_per_trial: usize,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Target DSC from the dataset mean: add `margin`, then round up to three
/// decimals. A positive margin always yields a target above the mean.
pub fn target_from_mean(mean: f64, margin: f64) -> f64 {
    let raw = mean + margin;
    // Slack absorbs binary representation error (0.803 + 0.007 stays 0.810).
    let mut t = (raw * 1000.0 - 1e-6).ceil() / 1000.0;
    if margin > 0.0 && t <= mean {
        t += 0.001;
    }
    t
}

/// Recommended target DSC carried by a finished report.
pub fn recommended_target(report: &MinbatReport) -> f64 {
    target_from_mean(report.dataset_mean_dsc, report.config.margin)
}

/// Run the full perturbation study over a dataset.
pub fn estimate_threshold(dataset: &[MaskVolume], config: &MinbatConfig) -> Result<MinbatReport, MinbatError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(MinbatError::EmptyDataset);
    }
    if let Some(&size) = config.subsample_sizes.iter().find(|&&s| s > dataset.len()) {
        return Err(MinbatError::SubsampleTooLarge { size, dataset: dataset.len() });
    }
    let seed = config.master_seed;
    let schedule = &config.schedule;

    let stats: Vec<SurfaceVolumeStats> = dataset
        .par_iter()
        .enumerate()
        .map(|(index, m)| morphology::surface_volume_stats(m).map_err(|_| MinbatError::EmptyCase { index }))
        .collect::<Result<_, _>>()?;

    let per_case: Vec<CaseRecord> = dataset
        .par_iter()
        .enumerate()
        .map(|(index, m)| {
            let dist = case_dsc_distribution(m, schedule, config.trials_per_case, seed, index as u64)?;
            Ok(CaseRecord {
                index,
                stats: stats[index],
                dsc_mean: dist.mean(),
                dsc_samples: dist.dsc,
                degenerate: dist.degenerate,
            })
        })
        .collect::<Result<_, MinbatError>>()?;

    let work: Vec<(usize, usize)> = config
        .subsample_sizes
        .iter()
        .flat_map(|&k| (0..config.trials_per_subsample).map(move |j| (k, j)))
        .collect();
    let trials: Vec<TrialRecord> = work
        .par_iter()
        .map(|&(k, j)| {
            let mut draw = rng::stream(seed, &[rng::tag("draw"), k as u64, j as u64]);
            let cases = index::sample(&mut draw, dataset.len(), k).into_vec();
            let mut scores = Vec::with_capacity(k);
            let mut degenerate = 0;
            for &c in &cases {
                let mut s = rng::stream(seed, &[rng::tag("subsample"), k as u64, j as u64, c as u64]);
                let (d, deg) = perturbed_dsc(&dataset[c], schedule, &mut s)?;
                scores.push(d);
                degenerate += deg as usize;
            }
            let svs: Vec<f64> = cases.iter().map(|&c| stats[c].ratio_c).collect();
            Ok(TrialRecord {
                dsc_mean: mean(&scores),
                sv_mean: mean(&svs),
                dsc_min: scores.iter().copied().fold(f64::INFINITY, f64::min),
                dsc_max: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                degenerate,
                cases,
            })
        })
        .collect::<Result<_, MinbatError>>()?;

    let per_size: Vec<SizeRow> = trials
        .chunks(config.trials_per_subsample)
        .zip(&config.subsample_sizes)
        .map(|(chunk, &size)| {
            let d: Vec<f64> = chunk.iter().map(|t| t.dsc_mean).collect();
            let s: Vec<f64> = chunk.iter().map(|t| t.sv_mean).collect();
            SizeRow {
                size,
                dsc_mean: mean(&d),
                dsc_sd: sample_sd(&d),
                sv_mean: mean(&s),
                sv_sd: sample_sd(&s),
                trials: chunk.to_vec(),
            }
        })
        .collect();

    let all: Vec<f64> = per_case.iter().flat_map(|c| c.dsc_samples.iter().copied()).collect();
    let dataset_mean_dsc = mean(&all);
    let degenerate_perturbations =
        per_case.iter().map(|c| c.degenerate).sum::<usize>() + trials.iter().map(|t| t.degenerate).sum::<usize>();
    Ok(MinbatReport {
        schema: REPORT_SCHEMA.to_string(),
        dataset_mean_sv: mean(&stats.iter().map(|s| s.ratio_c).collect::<Vec<_>>()),
        recommended_target: target_from_mean(dataset_mean_dsc, config.margin),
        dataset_mean_dsc,
        per_case,
        per_size,
        degenerate_perturbations,
        config: config.clone(),
        perturbations_per_trial: 1,
    })
}

/// CSV of the subsampling table: `size,dsc_mean,dsc_sd,sv_mean,sv_sd`.
pub fn per_size_csv(report: &MinbatReport) -> String {
    let mut out = String::from("size,dsc_mean,dsc_sd,sv_mean,sv_sd\n");
    for r in &report.per_size {
        out.push_str(&format!("{},{},{},{},{}\n", r.size, r.dsc_mean, r.dsc_sd, r.sv_mean, r.sv_sd));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volumes::{synth, Shape, SyntheticSpec};

    fn sphere(r: f64) -> MaskVolume {
        let n = 2 * r as usize + 6;
        let c = (n / 2) as f64;
        synth(&SyntheticSpec::new([n; 3], Shape::Sphere { center: [c; 3], radius: r })).unwrap()
    }

    #[test]
    fn identity_schedules() {
        let m = sphere(6.0);
        let empty = MarkovSchedule { steps: vec![] };
        let p = perturb_mask(&m, &empty, &mut rng::stream(0, &[])).unwrap();
        assert_eq!(p.mask, m);
        assert!(!p.degenerate);

        let zero = MarkovSchedule { steps: MarkovSchedule::standard2().steps.iter().map(|s| MarkovStep { probability: 0.0, ..*s }).collect() };
        assert_eq!(perturb_mask(&m, &zero, &mut rng::stream(0, &[])).unwrap().mask, m);
        assert_eq!(case_dsc_distribution(&m, &zero, 1, 9, 0).unwrap().dsc, vec![1.0]);
    }

    #[test]
    fn perturbation_is_reproducible() {
        let m = sphere(8.0);
        let s = MarkovSchedule::standard2();
        let a = case_dsc_distribution(&m, &s, 4, 42, 3).unwrap();
        let b = case_dsc_distribution(&m, &s, 4, 42, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.dsc.iter().all(|d| (0.0..=1.0).contains(d)));
        assert_ne!(a, case_dsc_distribution(&m, &s, 4, 42, 4).unwrap());
    }

    #[test]
    fn annihilation_is_flagged_with_zero_score() {
        let single = MaskVolume::from_fn([3, 3, 3], |x, y, z| (x, y, z) == (1, 1, 1)).unwrap();
        let kill = MarkovSchedule { steps: vec![MarkovStep::erode(1, 1.0)] };
        let d = case_dsc_distribution(&single, &kill, 3, 0, 0).unwrap();
        assert_eq!(d.dsc, vec![0.0; 3]);
        assert_eq!(d.degenerate, 3);
    }

    #[test]
    fn target_rounding_rule() {
        assert_eq!(target_from_mean(0.9769, 0.005), 0.982);
        assert_eq!(target_from_mean(0.9769, 0.0), 0.977);
        assert_eq!(target_from_mean(0.803, 0.007), 0.810);
        assert_eq!(target_from_mean(0.621, 0.009), 0.630);
        assert_eq!(target_from_mean(0.75, 0.0), 0.75);
        assert!(target_from_mean(0.977, 1e-12) > 0.977);
    }

    #[test]
    fn config_and_dataset_errors() {
        let m = sphere(4.0);
        let cfg = MinbatConfig { subsample_sizes: vec![2], ..Default::default() };
        assert_eq!(estimate_threshold(&[m.clone()], &cfg), Err(MinbatError::SubsampleTooLarge { size: 2, dataset: 1 }));
        assert_eq!(estimate_threshold(&[], &cfg), Err(MinbatError::EmptyDataset));
        let blank = MaskVolume::empty(m.dims()).unwrap();
        let cfg = MinbatConfig { subsample_sizes: vec![1], ..Default::default() };
        assert_eq!(estimate_threshold(&[m.clone(), blank], &cfg), Err(MinbatError::EmptyCase { index: 1 }));
        let bad = MinbatConfig { margin: -0.1, ..cfg.clone() };
        assert!(matches!(estimate_threshold(&[m.clone()], &bad), Err(MinbatError::InvalidConfig(_))));
        assert!(MarkovSchedule::profile("wide4").is_err());
        assert_eq!(MarkovSchedule::profile("wide3").unwrap().steps[0].radius, 2);
    }

    #[test]
    fn identical_cases_have_zero_sv_spread() {
        let data = vec![sphere(5.0); 6];
        let cfg = MinbatConfig { subsample_sizes: vec![1, 3, 6], trials_per_subsample: 4, trials_per_case: 2, ..Default::default() };
        let r = estimate_threshold(&data, &cfg).unwrap();
        for row in &r.per_size {
            assert_eq!(row.sv_sd, 0.0);
            assert_eq!(row.trials.len(), 4);
            for t in &row.trials {
                assert!(t.dsc_mean >= t.dsc_min && t.dsc_mean <= t.dsc_max);
                let mut c = t.cases.clone();
                c.sort();
                c.dedup();
                assert_eq!(c.len(), row.size);
            }
        }
        let all: Vec<f64> = r.per_case.iter().flat_map(|c| c.dsc_samples.clone()).collect();
        assert!((r.dataset_mean_dsc - mean(&all)).abs() < 1e-15);
        assert_eq!(r.recommended_target, target_from_mean(r.dataset_mean_dsc, 0.005));
        assert_eq!(recommended_target(&r), r.recommended_target);
        assert!(r.recommended_target > r.dataset_mean_dsc);
        let csv = per_size_csv(&r);
        assert_eq!(csv.lines().count(), 4);
    }
}
