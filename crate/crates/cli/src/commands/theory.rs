use clap::Args;
use segplan::theory::{curve_csv, curve_rows, CurveRow};
use serde::Serialize;

use crate::output::{Format, Header, Output};
use crate::CliError;

const MAX_POINTS: usize = 100_000;

#[derive(Debug, Args, Serialize)]
pub struct TheoryArgs {
    /// Explicit S/V ratios, comma separated. Overrides --grid.
    #[arg(long, value_delimiter = ',')]
    pub c: Option<Vec<f64>>,

    /// Evenly spaced ratios as start:stop:step.
    #[arg(long, default_value = "0.05:0.95:0.05")]
    pub grid: String,

    /// Monte Carlo draws per grid point.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Absolute tolerance of the numerical integral.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

pub(crate) fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("grid {text:?} must look like start:stop:step"));
    let parts: Vec<f64> = text.split(':').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let [start, stop, step] = parts[..] else { return Err(bad()) };
    if !(start.is_finite() && stop.is_finite() && step > 0.0 && stop >= start) {
        return Err(bad());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if n > MAX_POINTS {
        return Err(CliError::Usage(format!("grid has {n} points; the limit is {MAX_POINTS}")));
    }
    // Round away accumulated binary error so 0.15 prints as 0.15.
    Ok((0..n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect())
}

#[derive(Serialize)]
struct Curve<'a> {
    rows: &'a [CurveRow],
}

pub fn run(args: &TheoryArgs, out: &Output) -> Result<(), CliError> {
    let grid = match &args.c {
        Some(c) if c.is_empty() => return Err(CliError::Usage("--c needs at least one value".into())),
        Some(c) => c.clone(),
        None => parse_grid(&args.grid)?,
    };
    if !(args.tol > 0.0) {
        return Err(CliError::Usage(format!("--tol {} must be positive", args.tol)));
    }
    let rows = curve_rows(&grid, args.samples, args.seed, args.tol)?;
    let header = Header::new("theory", args, Some(args.seed));
    out.report("theory_curve", args.format, &header, &Curve { rows: &rows }, || curve_csv(&rows))?;
    Ok(())
}
