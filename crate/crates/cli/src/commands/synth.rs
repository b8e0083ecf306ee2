use std::collections::HashSet;
use std::fs;
use std::path::PathBuf;

use clap::Args;
use segplan::morphology::surface_volume_stats;
use segplan::volumes::{synth, write_mask_described, SyntheticSpec};
use serde::{Deserialize, Serialize};

use crate::output::{Header, Output};
use crate::CliError;

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// JSON file with one spec object or an array of them. Each object may
    /// carry a `name` used for its output file.
    pub spec: PathBuf,

    /// Write uncompressed `.nii` files instead of `.nii.gz`.
    #[arg(long)]
    pub plain: bool,
}

#[derive(Debug, Deserialize)]
struct Entry {
    name: Option<String>,
    #[serde(flatten)]
    spec: SyntheticSpec,
}

#[derive(Debug, Serialize)]
struct Written {
    name: String,
    file: String,
    volume: usize,
    ratio_c: Option<f64>,
    spec: SyntheticSpec,
}

#[derive(Debug, Serialize)]
struct Manifest {
    masks: Vec<Written>,
}

fn parse_entries(text: &str) -> Result<Vec<Entry>, CliError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("spec file: {e}")))?;
    let items = match value {
        serde_json::Value::Array(items) => items,
        other => vec![other],
    };
    if items.is_empty() {
        return Err(CliError::Usage("spec file holds no entries".into()));
    }
    items
        .into_iter()
        .enumerate()
        .map(|(i, v)| serde_json::from_value(v).map_err(|e| CliError::Usage(format!("spec entry {i}: {e}"))))
        .collect()
}

pub fn run(args: &SynthArgs, out: &Output) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.spec).map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", args.spec.display())))?;
    let entries = parse_entries(&text)?;

    // Validate everything before writing anything.
    let mut names = HashSet::new();
    let mut masks = Vec::with_capacity(entries.len());
    for (i, e) in entries.iter().enumerate() {
        let name = e.name.clone().unwrap_or_else(|| format!("case_{i:03}"));
        if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(CliError::Usage(format!("spec entry {i}: invalid name {name:?}")));
        }
        if !names.insert(name.clone()) {
            return Err(CliError::Usage(format!("spec entry {i}: duplicate name {name:?}")));
        }
        let mask = synth(&e.spec).map_err(|err| CliError::Usage(format!("spec entry {i} ({name}): {err}")))?;
        masks.push((name, mask));
    }

    out.ensure_dir()?;
    let ext = if args.plain { "nii" } else { "nii.gz" };
    let mut written = Vec::new();
    for ((name, mask), e) in masks.into_iter().zip(entries) {
        let file = format!("{name}.{ext}");
        let header = Header::new("synth", args, Some(e.spec.seed));
        write_mask_described(&mask, out.path(&file), &header.short())?;
        println!("wrote {}", out.path(&file).display());
        written.push(Written {
            name,
            file,
            volume: mask.count(),
            ratio_c: surface_volume_stats(&mask).ok().map(|s| s.ratio_c),
            spec: e.spec,
        });
    }
    let header = Header::new("synth", args, None);
    out.json("synth_manifest.json", &header, &Manifest { masks: written })?;
    Ok(())
}
