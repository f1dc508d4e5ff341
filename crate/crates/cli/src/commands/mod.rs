pub mod fit;
pub mod gwas;
pub mod ppi;
pub mod rebias;
pub mod simulate;

use clap::{Args, ValueEnum};
use log::warn;
use rebias_core::{fit_normal, fit_npmle, NpmleConfig, Prior};
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorChoice {
    Normal,
    Npmle,
}

/// Overrides for the NPMLE solver; unset fields keep the command's default.
#[derive(Debug, Clone, Default, Args)]
pub struct NpmleArgs {
    /// Number of grid points
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Lower grid endpoint [default: smallest b_hat]
    #[arg(long, allow_hyphen_values = true)]
    pub grid_lo: Option<f64>,
    /// Upper grid endpoint [default: largest b_hat]
    #[arg(long, allow_hyphen_values = true)]
    pub grid_hi: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Relative log-likelihood change that allows stopping
    #[arg(long)]
    pub tol_loglik: Option<f64>,
    /// Bound on the KKT gradient certificate
    #[arg(long)]
    pub tol_kkt: Option<f64>,
}

impl NpmleArgs {
    pub fn apply(&self, base: NpmleConfig) -> CliResult<NpmleConfig> {
        let cfg = NpmleConfig {
            grid_size: self.grid_size.unwrap_or(base.grid_size),
            grid_lo: self.grid_lo.or(base.grid_lo),
            grid_hi: self.grid_hi.or(base.grid_hi),
            max_iters: self.max_iters.unwrap_or(base.max_iters),
            tol_loglik: self.tol_loglik.unwrap_or(base.tol_loglik),
            tol_kkt: self.tol_kkt.unwrap_or(base.tol_kkt),
        };
        cfg.validate()
            .map_err(|e| CliError::Usage(format!("NPMLE options: {e}")))?;
        Ok(cfg)
    }
}

pub struct FittedPrior {
    pub prior: Prior,
    pub diagnostics: serde_json::Value,
}

/// Fits the bias prior on `(b_hat, tau)`; an unconverged NPMLE is an error.
pub fn fit_prior(
    kind: PriorChoice,
    b_hats: &[f64],
    taus: &[f64],
    cfg: &NpmleConfig,
) -> CliResult<FittedPrior> {
    match kind {
        PriorChoice::Normal => {
            let fit = fit_normal(b_hats, taus)?;
            if fit.degenerate {
                warn!("all b_hat values are identical; the fitted prior is a point mass");
            }
            Ok(FittedPrior {
                prior: Prior::Normal(fit.prior),
                diagnostics: json!({
                    "kind": "normal",
                    "loglik": fit.loglik,
                    "degenerate": fit.degenerate,
                }),
            })
        }
        PriorChoice::Npmle => {
            let fit = fit_npmle(b_hats, taus, cfg)?;
            let d = &fit.diagnostics;
            if !d.converged {
                log::error!(
                    "NPMLE stopped after {} iterations with kkt_sup = {:e}",
                    d.iterations,
                    d.kkt_sup
                );
            }
            let fit = fit.require_converged()?;
            let diagnostics = json!({
                "kind": "npmle",
                "loglik": fit.diagnostics.final_loglik,
                "iterations": fit.diagnostics.iterations,
                "kkt_sup": fit.diagnostics.kkt_sup,
                "converged": fit.diagnostics.converged,
                "atoms": fit.prior.len(),
            });
            Ok(FittedPrior {
                prior: Prior::Discrete(fit.prior),
                diagnostics,
            })
        }
    }
}

/// Rejects alpha levels outside `(0, 1)`.
pub fn check_alphas(alphas: &[f64]) -> CliResult<()> {
    if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return Err(CliError::Usage("--alpha values must lie in (0, 1)".into()));
    }
    Ok(())
}
