use std::path::PathBuf;

use clap::Args;
use segplan::morphology::{bounding_box, connected_components, surface_volume_stats, BoundingBox, Connectivity};
use serde::Serialize;

use super::{load_masks, NamedMask};
use crate::output::{Format, Header, Output};
use crate::CliError;

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    /// Mask files or directories of masks.
    #[arg(required = true)]
    pub masks: Vec<PathBuf>,

    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Clone, Serialize)]
pub(crate) struct CaseStats {
    pub name: String,
    pub volume: usize,
    pub surface: usize,
    pub ratio_c: Option<f64>,
    /// 26-connected components.
    pub components: usize,
    pub bbox: Option<BoundingBox>,
    pub empty: bool,
}

#[derive(Debug, Clone, Serialize)]
pub(crate) struct Aggregate {
    pub cases: usize,
    pub empty: usize,
    pub mean_volume: Option<f64>,
    pub mean_surface: Option<f64>,
    /// Over non-empty cases.
    pub mean_ratio_c: Option<f64>,
    pub sd_ratio_c: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub(crate) struct StatsReport {
    pub cases: Vec<CaseStats>,
    pub aggregate: Aggregate,
    pub warnings: Vec<String>,
}

pub(crate) fn case_stats(m: &NamedMask) -> CaseStats {
    match surface_volume_stats(&m.mask) {
        Ok(s) => CaseStats {
            name: m.name.clone(),
            volume: s.volume,
            surface: s.surface,
            ratio_c: Some(s.ratio_c),
            components: connected_components(&m.mask, Connectivity::TwentySix).count,
            bbox: bounding_box(&m.mask),
            empty: false,
        },
        Err(_) => CaseStats { name: m.name.clone(), volume: 0, surface: 0, ratio_c: None, components: 0, bbox: None, empty: true },
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub(crate) fn summarize(masks: &[NamedMask]) -> StatsReport {
    let cases: Vec<CaseStats> = masks.iter().map(case_stats).collect();
    let full: Vec<&CaseStats> = cases.iter().filter(|c| !c.empty).collect();
    let ratios: Vec<f64> = full.iter().filter_map(|c| c.ratio_c).collect();
    let mean_c = mean(&ratios);
    let sd_c = mean_c.filter(|_| ratios.len() > 1).map(|m| {
        (ratios.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (ratios.len() - 1) as f64).sqrt()
    });
    let warnings = cases.iter().filter(|c| c.empty).map(|c| format!("{}: mask is empty", c.name)).collect();
    StatsReport {
        aggregate: Aggregate {
            cases: cases.len(),
            empty: cases.len() - full.len(),
            mean_volume: mean(&full.iter().map(|c| c.volume as f64).collect::<Vec<_>>()),
            mean_surface: mean(&full.iter().map(|c| c.surface as f64).collect::<Vec<_>>()),
            mean_ratio_c: mean_c,
            sd_ratio_c: sd_c,
        },
        cases,
        warnings,
    }
}

fn to_csv(report: &StatsReport) -> String {
    let mut s = String::from("name,volume,surface,ratio_c,components,x0,y0,z0,x1,y1,z1,empty\n");
    for c in &report.cases {
        let ratio = c.ratio_c.map(|r| r.to_string()).unwrap_or_default();
        let bbox = c.bbox.map(|b| b.to_array().map(|v| v.to_string()).join(",")).unwrap_or_else(|| ",,,,,".into());
        s.push_str(&format!("{},{},{},{ratio},{},{bbox},{}\n", c.name, c.volume, c.surface, c.components, c.empty));
    }
    s
}

pub fn run(args: &StatsArgs, out: &Output) -> Result<(), CliError> {
    let masks = load_masks(&args.masks)?;
    let report = summarize(&masks);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let header = Header::new("stats", args, None);
    out.report("stats", args.format, &header, &report, || to_csv(&report))?;
    let a = &report.aggregate;
    match a.mean_ratio_c {
        Some(c) => println!("{} cases, {} empty, mean S/V ratio {c:.6}", a.cases, a.empty),
        None => println!("{} cases, {} empty", a.cases, a.empty),
    }
    eprintln!("warnings: {}", report.warnings.len());
    Ok(())
}
