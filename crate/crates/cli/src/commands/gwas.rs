use std::path::PathBuf;

use clap::Args;
use log::{debug, info, warn};
use rebias_core::gwas::{convert, rebias_gwas_pipeline, GwasOptions, GwasRecord, PriorKind};
use rebias_core::{Error, NpmleConfig};
use serde_json::json;

use super::{NpmleArgs, PriorChoice};
use crate::error::{CliError, CliResult};
use crate::io::{create_dir, fmt_exact, read_gwas, write_json, CsvOut};
use crate::manifest::Recorder;

pub const DISCOVERY_COLUMNS: [&str; 7] = [
    "snp_id",
    "p_rebias",
    "p_direct",
    "p_population",
    "rebias_discovered",
    "direct_discovered",
    "population_discovered",
];

#[derive(Debug, Args)]
pub struct GwasArgs {
    /// TSV with columns snp_id, beta_direct, beta_parental, se_direct, se_parental, corr
    pub input: PathBuf,
    /// Target false discovery rate for Benjamini-Hochberg
    #[arg(long, default_value_t = 0.05)]
    pub q: f64,
    /// Prior family for the parental coefficients
    #[arg(long, value_enum, default_value = "npmle")]
    pub prior: PriorChoice,
    /// Drop records with inconsistent standard errors instead of failing
    #[arg(long)]
    pub skip_bad: bool,
    /// Directory for discoveries.csv, counts.json, prior.json and manifest.json
    #[arg(short, long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub npmle: NpmleArgs,
}

pub fn run(args: &GwasArgs) -> CliResult<()> {
    if !(args.q > 0.0 && args.q < 1.0) {
        return Err(CliError::Usage("--q must lie in (0, 1)".into()));
    }
    let npmle = args.npmle.apply(NpmleConfig::gwas())?;
    let config = json!({
        "q": args.q,
        "prior": args.prior,
        "skip_bad": args.skip_bad,
        "npmle": npmle,
    });
    let mut rec = Recorder::new("gwas", &config, &[&args.input]);

    let mut records: Vec<GwasRecord> = Vec::new();
    let mut skipped = 0usize;
    for (line, r) in read_gwas(&args.input)? {
        match convert(&r) {
            Ok(t) => {
                debug!(
                    "{}: theta_b_hat={} sigma={} tau={} rho={}",
                    t.id, t.theta_b_hat, t.sigma, t.tau, t.rho
                );
                records.push(r);
            }
            Err(Error::NonPositiveVariance { id }) if args.skip_bad => {
                warn!("line {line}: skipping {id}, implied variance is not positive");
                skipped += 1;
            }
            Err(e @ Error::NonPositiveVariance { .. }) => return Err(e.into()),
            Err(e) => return Err(CliError::parse(&args.input, line, e.to_string())),
        }
    }
    info!("{} records converted, {} skipped", records.len(), skipped);

    let opts = GwasOptions {
        prior_kind: match args.prior {
            PriorChoice::Normal => PriorKind::Normal,
            PriorChoice::Npmle => PriorKind::Npmle,
        },
        q: args.q,
        npmle,
    };
    let report = rebias_gwas_pipeline(&records, &opts)?;

    create_dir(&args.out_dir)?;
    let mut out = CsvOut::create(
        &rec.output(args.out_dir.join("discoveries.csv")),
        &DISCOVERY_COLUMNS,
    )?;
    for r in &report.rows {
        out.row([
            r.snp_id.clone(),
            fmt_exact(r.p_rebias),
            fmt_exact(r.p_direct),
            fmt_exact(r.p_population),
            r.rebias_discovered.to_string(),
            r.direct_discovered.to_string(),
            r.population_discovered.to_string(),
        ])?;
    }
    out.finish()?;
    let counts = json!({
        "snps": report.counts.snps,
        "skipped": skipped,
        "q": args.q,
        "discoveries": {
            "rebias": report.counts.rebias,
            "direct": report.counts.direct,
            "population": report.counts.population,
        },
    });
    write_json(&rec.output(args.out_dir.join("counts.json")), &counts)?;
    write_json(&rec.output(args.out_dir.join("prior.json")), &report.prior)?;
    if let Some(d) = &report.diagnostics {
        write_json(&rec.output(args.out_dir.join("diagnostics.json")), d)?;
    }
    info!(
        "discoveries: rebias {}, direct {}, population {}",
        report.counts.rebias, report.counts.direct, report.counts.population
    );
    rec.finish(&args.out_dir)?;
    Ok(())
}
