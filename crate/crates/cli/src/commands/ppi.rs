use std::path::PathBuf;

use clap::{Args, ValueEnum};
use log::{info, warn};
use rebias_core::ppi::{
    baseline_intervals, estimate_moments, power_tuning_lambda, to_task_summary, PpiTask, V2Source,
};
use rebias_core::{
    debiased_interval, rebias_interval, Error, IntervalReport, NpmleConfig, TaskSummary,
};
use serde::Serialize;
use serde_json::json;

use super::{check_alphas, fit_prior, NpmleArgs, PriorChoice};
use crate::error::{CliError, CliResult};
use crate::io::TASK_COLUMNS;
use crate::io::{create_dir, fmt_exact, read_ppi, write_json, CsvOut};
use crate::manifest::Recorder;

pub const PPI_COLUMNS: [&str; 7] = ["task_id", "method", "alpha", "point", "lo", "hi", "width"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum V2Arg {
    Labeled,
    Unlabeled,
}

impl From<V2Arg> for V2Source {
    fn from(v: V2Arg) -> Self {
        match v {
            V2Arg::Labeled => V2Source::Labeled,
            V2Arg::Unlabeled => V2Source::Unlabeled,
        }
    }
}

#[derive(Debug, Args)]
pub struct PpiArgs {
    /// Long CSV with columns task_id, split (labeled|unlabeled), y, pred
    pub input: PathBuf,
    /// Miscoverage levels, comma separated or repeated
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    pub alpha: Vec<f64>,
    /// Sample that supplies the prediction variance
    #[arg(long, value_enum, default_value = "labeled")]
    pub v2_source: V2Arg,
    /// Prior family for the rebiased interval
    #[arg(long, value_enum, default_value = "npmle")]
    pub prior: PriorChoice,
    /// Directory for intervals.csv, summaries.csv, skipped.csv, prior.json and manifest.json
    #[arg(short, long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub npmle: NpmleArgs,
}

/// A task mapped onto the rebiasing model with its power-tuning weight.
pub struct Prepared {
    pub task: PpiTask,
    pub summary: TaskSummary,
    pub lambda: f64,
}

/// Power-tunes one task; `Err` carries the reason it is skipped. A zero
/// prediction variance falls back to `lambda = 0`.
pub fn prepare(task: PpiTask, v2: V2Source) -> Result<Prepared, String> {
    let mom = estimate_moments(&task, v2).map_err(|e| e.to_string())?;
    let lambda = match power_tuning_lambda(&mom) {
        Ok(l) => l,
        Err(Error::ZeroPredictorVariance) => {
            warn!(
                "task {}: zero prediction variance, using lambda = 0",
                task.id
            );
            0.0
        }
        Err(e) => return Err(e.to_string()),
    };
    let summary = to_task_summary(&task, &mom, lambda).map_err(|e| e.to_string())?;
    Ok(Prepared {
        task,
        summary,
        lambda,
    })
}

pub fn run(args: &PpiArgs) -> CliResult<()> {
    check_alphas(&args.alpha)?;
    let npmle = args.npmle.apply(NpmleConfig::default())?;
    let config = json!({
        "alpha": args.alpha,
        "v2_source": args.v2_source,
        "prior": args.prior,
        "npmle": npmle,
    });
    let mut rec = Recorder::new("ppi", &config, &[&args.input]);

    let raw = read_ppi(&args.input)?;
    let total = raw.len();
    let mut kept = Vec::new();
    let mut skipped = Vec::new();
    for task in raw {
        let id = task.id.clone();
        match prepare(task, args.v2_source.into()) {
            Ok(p) => kept.push(p),
            Err(reason) => {
                warn!("skipping task {id}: {reason}");
                skipped.push((id, reason));
            }
        }
    }
    info!("{} of {} tasks usable", kept.len(), total);
    if kept.is_empty() {
        return Err(CliError::bad_input(&args.input, "no task has enough data"));
    }

    create_dir(&args.out_dir)?;
    let mut out = CsvOut::create(
        &rec.output(args.out_dir.join("skipped.csv")),
        &["task_id", "reason"],
    )?;
    for (id, reason) in &skipped {
        out.row([id.as_str(), reason.as_str()])?;
    }
    out.finish()?;

    let mut cols = vec!["lambda"];
    cols.splice(0..0, TASK_COLUMNS);
    let mut out = CsvOut::create(&rec.output(args.out_dir.join("summaries.csv")), &cols)?;
    for p in &kept {
        let s = &p.summary;
        let nums = [s.theta_b_hat, s.b_hat, s.sigma, s.tau, s.rho, p.lambda];
        out.row(std::iter::once(s.id.clone()).chain(nums.iter().map(|&x| fmt_exact(x))))?;
    }
    out.finish()?;

    let b: Vec<f64> = kept.iter().map(|p| p.summary.b_hat).collect();
    let tau: Vec<f64> = kept.iter().map(|p| p.summary.tau).collect();
    let fitted = fit_prior(args.prior, &b, &tau, &npmle)?;
    write_json(&rec.output(args.out_dir.join("prior.json")), &fitted.prior)?;
    write_json(
        &rec.output(args.out_dir.join("diagnostics.json")),
        &fitted.diagnostics,
    )?;

    let rb_name = match args.prior {
        PriorChoice::Normal => "rb_normal",
        PriorChoice::Npmle => "rb_npmle",
    };
    let mut out = CsvOut::create(
        &rec.output(args.out_dir.join("intervals.csv")),
        &PPI_COLUMNS,
    )?;
    for p in &kept {
        for &alpha in &args.alpha {
            let (classical, pred_mean) = baseline_intervals(&p.task, alpha)?;
            let pt = debiased_interval(&p.summary, alpha)?;
            let rb = rebias_interval(&fitted.prior, &p.summary, alpha)?;
            let rows: [(&str, &IntervalReport); 4] = [
                ("classical", &classical),
                ("pred_mean", &pred_mean),
                ("pt", &pt),
                (rb_name, &rb),
            ];
            for (name, iv) in rows {
                out.row([
                    p.task.id.clone(),
                    name.to_string(),
                    fmt_exact(alpha),
                    fmt_exact(iv.point),
                    fmt_exact(iv.lo),
                    fmt_exact(iv.hi),
                    fmt_exact(iv.width()),
                ])?;
            }
        }
    }
    out.finish()?;
    rec.finish(&args.out_dir)?;
    Ok(())
}
