use std::path::PathBuf;

use clap::Args;
use log::info;
use rebias_core::{rebias_interval, rebias_pvalue, NpmleConfig};
use serde_json::json;

use super::{check_alphas, fit_prior, NpmleArgs, PriorChoice};
use crate::error::CliResult;
use crate::io::{create_dir, fmt_exact, read_prior, read_tasks, write_json, CsvOut};
use crate::manifest::Recorder;

/// Columns of `intervals.csv`.
pub const INTERVAL_COLUMNS: [&str; 6] = ["id", "alpha", "point", "lo", "hi", "p_value"];

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["prior", "fit_inline"])))]
pub struct RebiasArgs {
    /// CSV with columns id, theta_b_hat, b_hat, sigma, tau, rho
    pub input: PathBuf,
    /// Prior JSON written by `rebias fit`
    #[arg(long)]
    pub prior: Option<PathBuf>,
    /// Fit the prior on the input's (b_hat, tau) instead of reading one
    #[arg(long, value_enum)]
    pub fit_inline: Option<PriorChoice>,
    /// Miscoverage levels, comma separated or repeated
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    pub alpha: Vec<f64>,
    /// Null value of the target for the reported p-values
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub null: f64,
    /// Directory for intervals.csv and manifest.json
    #[arg(short, long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub npmle: NpmleArgs,
}

pub fn run(args: &RebiasArgs) -> CliResult<()> {
    check_alphas(&args.alpha)?;
    let npmle = args.npmle.apply(NpmleConfig::default())?;
    let config = json!({
        "prior_file": args.prior,
        "fit_inline": args.fit_inline,
        "alpha": args.alpha,
        "null": args.null,
        "npmle": npmle,
    });
    let mut inputs = vec![args.input.as_path()];
    if let Some(p) = &args.prior {
        inputs.push(p);
    }
    let mut rec = Recorder::new("rebias", &config, &inputs);

    let tasks = read_tasks(&args.input)?;
    info!("read {} tasks from {}", tasks.len(), args.input.display());
    create_dir(&args.out_dir)?;
    let prior = match (&args.prior, args.fit_inline) {
        (Some(path), _) => read_prior(path)?,
        (None, Some(kind)) => {
            let b: Vec<f64> = tasks.iter().map(|t| t.b_hat).collect();
            let tau: Vec<f64> = tasks.iter().map(|t| t.tau).collect();
            let fitted = fit_prior(kind, &b, &tau, &npmle)?;
            write_json(&rec.output(args.out_dir.join("prior.json")), &fitted.prior)?;
            write_json(
                &rec.output(args.out_dir.join("diagnostics.json")),
                &fitted.diagnostics,
            )?;
            fitted.prior
        }
        (None, None) => unreachable!("clap requires a prior source"),
    };

    let mut out = CsvOut::create(
        &rec.output(args.out_dir.join("intervals.csv")),
        &INTERVAL_COLUMNS,
    )?;
    for task in &tasks {
        let p = rebias_pvalue(&prior, task, args.null)?;
        for &alpha in &args.alpha {
            let iv = rebias_interval(&prior, task, alpha)?;
            out.row([
                task.id.clone(),
                fmt_exact(alpha),
                fmt_exact(iv.point),
                fmt_exact(iv.lo),
                fmt_exact(iv.hi),
                fmt_exact(p),
            ])?;
        }
    }
    out.finish()?;
    rec.finish(&args.out_dir)?;
    Ok(())
}
