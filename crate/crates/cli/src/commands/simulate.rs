use std::path::{Path, PathBuf};

use clap::Args;
use log::{info, warn};
use rayon::prelude::*;
use rebias_core::sim::{aggregate, run_replicate, SimConfig, SimResult};

use crate::error::{CliError, CliResult};
use crate::io::{create_dir, fmt_sig6, write_json, CsvOut};
use crate::manifest::Recorder;

pub const SIM_COLUMNS: [&str; 8] = [
    "method",
    "alpha",
    "coverage",
    "coverage_se",
    "width",
    "width_se",
    "width_ratio",
    "width_ratio_se",
];

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation config, TOML or JSON by file extension
    pub config: PathBuf,
    /// Seed for every random draw; overrides any seed in the config
    #[arg(long)]
    pub seed: u64,
    /// Worker threads [default: all cores]; results do not depend on it
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Exit with status 5 if any replicate has a failed prior fit
    #[arg(long)]
    pub strict: bool,
    /// Directory for sim.csv, sim.json and manifest.json
    #[arg(short, long)]
    pub out_dir: PathBuf,
}

pub fn load_config(path: &Path) -> CliResult<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let parsed = match ext.as_deref() {
        Some("toml") => toml::from_str(&text).map_err(|e| e.to_string()),
        Some("json") => serde_json::from_str(&text).map_err(|e| e.to_string()),
        _ => Err("config must have a .toml or .json extension".to_string()),
    };
    parsed.map_err(|m| CliError::bad_input(path, m))
}

/// Runs every replicate on `threads` workers and reduces in replicate
/// order, so the result is the same for any thread count.
pub fn simulate(cfg: &SimConfig, threads: usize) -> CliResult<SimResult> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let outcomes = pool.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| run_replicate(cfg, r))
            .collect::<Result<Vec<_>, _>>()
    })?;
    for o in &outcomes {
        for (method, reason) in &o.failures {
            warn!(
                "replicate {}: {} fit failed: {}",
                o.replicate, method, reason
            );
        }
    }
    Ok(aggregate(cfg, &outcomes))
}

pub fn write_sim_csv(path: &Path, result: &SimResult) -> CliResult<()> {
    let mut out = CsvOut::create(path, &SIM_COLUMNS)?;
    for c in &result.cells {
        out.row([
            c.method.as_str().to_string(),
            fmt_sig6(c.alpha),
            fmt_sig6(c.coverage),
            fmt_sig6(c.coverage_se),
            fmt_sig6(c.width),
            fmt_sig6(c.width_se),
            fmt_sig6(c.width_ratio),
            fmt_sig6(c.width_ratio_se),
        ])?;
    }
    out.finish()
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let mut cfg = load_config(&args.config)?;
    if cfg.seed != 0 && cfg.seed != args.seed {
        info!("--seed {} replaces config seed {}", args.seed, cfg.seed);
    }
    cfg.seed = args.seed;
    let mut rec = Recorder::new("simulate", &cfg, &[&args.config]);
    rec.seed(args.seed);

    let result = simulate(&cfg, args.threads)?;
    create_dir(&args.out_dir)?;
    write_sim_csv(&rec.output(args.out_dir.join("sim.csv")), &result)?;
    write_json(&rec.output(args.out_dir.join("sim.json")), &result)?;
    rec.finish(&args.out_dir)?;

    info!(
        "{} replicates, {} with a failed fit",
        result.replicates, result.failed_replicates
    );
    if result.failed_replicates > 0 {
        if args.strict {
            return Err(CliError::StrictFailure {
                failed: result.failed_replicates,
                replicates: result.replicates,
            });
        }
        warn!(
            "{} of {} replicates had a failed fit; see the `failed` counts in sim.json",
            result.failed_replicates, result.replicates
        );
    }
    Ok(())
}
