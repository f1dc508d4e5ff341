use std::path::PathBuf;

use clap::Args;
use log::info;
use rebias_core::{implied_marginal_curve, NpmleConfig};
use serde_json::json;

use super::{fit_prior, NpmleArgs, PriorChoice};
use crate::error::CliResult;
use crate::io::{create_dir, fmt_exact, read_bias_table, write_json, CsvOut};
use crate::manifest::Recorder;

/// Points in the implied marginal density curve.
const CURVE_POINTS: usize = 201;

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with columns id, b_hat, tau
    pub input: PathBuf,
    /// Prior family
    #[arg(long, value_enum, default_value = "npmle")]
    pub prior: PriorChoice,
    /// Directory for prior.json, diagnostics.json, marginal.csv and manifest.json
    #[arg(short, long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub npmle: NpmleArgs,
}

pub fn run(args: &FitArgs) -> CliResult<()> {
    let npmle = args.npmle.apply(NpmleConfig::default())?;
    let config = json!({ "prior": args.prior, "npmle": npmle });
    let mut rec = Recorder::new("fit", &config, &[&args.input]);

    let table = read_bias_table(&args.input)?;
    info!(
        "read {} rows from {}",
        table.ids.len(),
        args.input.display()
    );
    let fitted = fit_prior(args.prior, &table.b_hats, &table.taus, &npmle)?;

    create_dir(&args.out_dir)?;
    write_json(&rec.output(args.out_dir.join("prior.json")), &fitted.prior)?;
    write_json(
        &rec.output(args.out_dir.join("diagnostics.json")),
        &fitted.diagnostics,
    )?;

    let grid = curve_grid(&table.b_hats, &table.taus);
    let curve = implied_marginal_curve(&fitted.prior, &table.taus, &grid)?;
    let mut out = CsvOut::create(
        &rec.output(args.out_dir.join("marginal.csv")),
        &["b_hat", "density"],
    )?;
    for (x, f) in curve {
        out.row([fmt_exact(x), fmt_exact(f)])?;
    }
    out.finish()?;
    rec.finish(&args.out_dir)?;
    Ok(())
}

/// Even grid covering the data plus three noise SDs on either side.
fn curve_grid(b_hats: &[f64], taus: &[f64]) -> Vec<f64> {
    let lo = b_hats.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = b_hats.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = 3.0 * taus.iter().copied().fold(0.0, f64::max);
    let (lo, hi) = (lo - pad, hi + pad);
    let step = (hi - lo) / (CURVE_POINTS - 1) as f64;
    (0..CURVE_POINTS).map(|i| lo + step * i as f64).collect()
}
