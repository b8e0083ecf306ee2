use std::path::PathBuf;

use clap::{Args, ValueEnum};
use segplan::morphology::BoundingBox;
use segplan::reps::{self, PatchParams, TilingMode};
use segplan::volumes::read_mask;
use serde::Serialize;

use crate::output::{Format, Header, Output};
use crate::CliError;

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// One tiling over the bounding box of all foreground.
    Union,
    /// A tiling per 26-connected component.
    PerComponent,
}

#[derive(Debug, Args, Serialize)]
pub struct RepsArgs {
    pub mask: PathBuf,

    /// Core patch edge.
    #[arg(long, default_value_t = 64)]
    pub d_p: usize,

    /// Minimum overlap between neighbouring cores.
    #[arg(long, default_value_t = 16)]
    pub d_o: usize,

    /// Expansion per side.
    #[arg(long, default_value_t = 16)]
    pub d_b: usize,

    /// Number of epoch samples to draw.
    #[arg(long, default_value_t = 1)]
    pub epochs: u64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, value_enum, default_value_t = Mode::Union)]
    pub mode: Mode,

    /// Fail unless every foreground voxel lies in a core box.
    #[arg(long)]
    pub check_coverage: bool,

    /// Emit this many random positive patches instead of a plan.
    #[arg(long)]
    pub baseline: Option<usize>,

    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Serialize)]
struct Baseline<'a> {
    d_p: usize,
    seed: u64,
    boxes: &'a [BoundingBox],
}

fn boxes_csv(boxes: &[BoundingBox]) -> String {
    let mut s = String::from("index,x0,y0,z0,x1,y1,z1\n");
    for (i, b) in boxes.iter().enumerate() {
        s.push_str(&format!("{i},{}\n", b.to_array().map(|v| v.to_string()).join(",")));
    }
    s
}

pub fn run(args: &RepsArgs, out: &Output) -> Result<(), CliError> {
    let params = PatchParams { d_p: args.d_p, d_o: args.d_o, d_b: args.d_b };
    println!("patch parameters d_p/d_o/d_b = {}/{}/{}", params.d_p, params.d_o, params.d_b);
    params.validate()?;
    let mask = read_mask(&args.mask)?;
    let header = Header::new("reps", args, Some(args.seed));

    if let Some(n) = args.baseline {
        let boxes = reps::baseline_random_positive(&mask, n, params.d_p, args.seed)?;
        let body = Baseline { d_p: params.d_p, seed: args.seed, boxes: &boxes };
        out.report("reps_baseline", args.format, &header, &body, || boxes_csv(&boxes))?;
        return Ok(());
    }

    let mode = match args.mode {
        Mode::Union => TilingMode::Union,
        Mode::PerComponent => TilingMode::PerComponent,
    };
    let plan = reps::plan_patches_with_mode(&mask, &params, mode)?;
    println!("{} core patches over ROI {:?}", plan.patch_count(), plan.roi_bbox.to_array());
    if args.check_coverage {
        let uncovered = mask
            .foreground_indices()
            .filter(|&i| {
                let p = mask.coords(i);
                !plan.core_boxes.iter().any(|b| b.contains_point(p))
            })
            .count();
        if uncovered > 0 {
            return Err(CliError::Runtime(format!("coverage check failed: {uncovered} foreground voxels outside every core box")));
        }
        println!("coverage check passed");
    }
    out.report("reps_plan", args.format, &header, &plan, || reps::plan_csv(&plan))?;
    for epoch in 0..args.epochs {
        let sample = reps::sample_epoch(&plan, args.seed, epoch);
        out.report(&format!("reps_epoch_{epoch:03}"), args.format, &header, &sample, || reps::epoch_csv(&sample))?;
    }
    Ok(())
}
