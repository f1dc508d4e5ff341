//! Family-based GWAS summary statistics: conversion into the rebiasing
//! model, rebiased p-values at `θ0 = 0`, and BH discovery sets.

use alloc::string::String;
use alloc::vec::Vec;

use crate::fdr::bh_reject;
use crate::fit::{fit_normal, fit_npmle, FitDiagnostics, NpmleConfig};
use crate::math::{sqrt, two_sided_pvalue};
use crate::model::{conditional_law, pvalue_from_law};
use crate::prior::Prior;
use crate::task::TaskSummary;
use crate::{Error, Result};

/// One SNP's direct-effect estimate, parental coefficient, their standard
/// errors and correlation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GwasRecord {
    pub snp_id: String,
    /// Unbiased direct-effect estimate.
    pub theta_ub_hat: f64,
    /// Parental coefficient, the bias estimate.
    pub b_hat: f64,
    /// Standard error of the direct effect.
    pub sigma_tilde: f64,
    /// Standard error of the parental coefficient.
    pub tau: f64,
    /// Correlation of the direct-effect and parental estimates.
    pub gamma: f64,
}

impl GwasRecord {
    fn validate(&self) -> Result<()> {
        let fail = |reason| {
            Err(Error::InvalidTask {
                id: self.snp_id.clone(),
                reason,
            })
        };
        if !(self.theta_ub_hat.is_finite() && self.b_hat.is_finite()) {
            return fail("estimates must be finite");
        }
        if !(self.sigma_tilde.is_finite()
            && self.sigma_tilde > 0.0
            && self.tau.is_finite()
            && self.tau > 0.0)
        {
            return fail("standard errors must be positive and finite");
        }
        // |γ| = 1 is let through: it describes a singular covariance and is
        // reported as a non-positive variance by `convert`
        if !(self.gamma.abs() <= 1.0) {
            return fail("correlation must lie in [-1, 1]");
        }
        Ok(())
    }

    /// Two-sided z-test p-value of the direct effect.
    pub fn direct_pvalue(&self) -> f64 {
        two_sided_pvalue(self.theta_ub_hat / self.sigma_tilde)
    }
}

/// Converts a record into the `(theta_b_hat, b_hat)` parameterization:
/// the population effect is `theta_ub_hat + b_hat`.
pub fn convert(rec: &GwasRecord) -> Result<TaskSummary> {
    rec.validate()?;
    let (st, t, g) = (rec.sigma_tilde, rec.tau, rec.gamma);
    let sigma2 = st * st + t * t + 2.0 * g * st * t;
    if !(sigma2 > 0.0) {
        return Err(Error::NonPositiveVariance {
            id: rec.snp_id.clone(),
        });
    }
    let sigma = sqrt(sigma2);
    let rho = (t + g * st) / sigma;
    TaskSummary::new(
        rec.snp_id.clone(),
        rec.theta_ub_hat + rec.b_hat,
        rec.b_hat,
        sigma,
        t,
        rho,
    )
    .map_err(|_| Error::NonPositiveVariance {
        id: rec.snp_id.clone(),
    })
}

/// Inverse of [`convert`].
pub fn to_record(task: &TaskSummary) -> Result<GwasRecord> {
    task.validate()?;
    Ok(GwasRecord {
        snp_id: task.id.clone(),
        theta_ub_hat: task.theta_db_hat(),
        b_hat: task.b_hat,
        sigma_tilde: task.sigma_tilde(),
        tau: task.tau,
        gamma: task.gamma(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PriorKind {
    Normal,
    #[default]
    Npmle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GwasOptions {
    pub prior_kind: PriorKind,
    /// BH target FDR.
    pub q: f64,
    pub npmle: NpmleConfig,
}

impl Default for GwasOptions {
    fn default() -> Self {
        Self {
            prior_kind: PriorKind::Npmle,
            q: 0.05,
            npmle: NpmleConfig::gwas(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GwasRow {
    pub snp_id: String,
    pub p_rebias: f64,
    pub p_direct: f64,
    pub p_population: f64,
    pub rebias_discovered: bool,
    pub direct_discovered: bool,
    pub population_discovered: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiscoveryCounts {
    pub snps: usize,
    pub rebias: usize,
    pub direct: usize,
    pub population: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GwasReport {
    pub rows: Vec<GwasRow>,
    pub prior: Prior,
    /// Present when the prior was fitted by NPMLE.
    pub diagnostics: Option<FitDiagnostics>,
    pub counts: DiscoveryCounts,
}

/// Converts every record, fits the bias prior on `(b_hat, tau)`, computes
/// rebiased p-values at zero effect and runs BH on those and on the direct-
/// and population-effect z-tests.
pub fn rebias_gwas_pipeline(records: &[GwasRecord], opts: &GwasOptions) -> Result<GwasReport> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let tasks = records.iter().map(convert).collect::<Result<Vec<_>>>()?;
    let b_hats: Vec<f64> = tasks.iter().map(|t| t.b_hat).collect();
    let taus: Vec<f64> = tasks.iter().map(|t| t.tau).collect();
    let (prior, diagnostics) = match opts.prior_kind {
        PriorKind::Normal => (Prior::Normal(fit_normal(&b_hats, &taus)?.prior), None),
        PriorKind::Npmle => {
            let fit = fit_npmle(&b_hats, &taus, &opts.npmle)?.require_converged()?;
            (Prior::Discrete(fit.prior), Some(fit.diagnostics))
        }
    };
    let mut report = rebias_gwas_with_prior(records, &tasks, &prior, opts.q)?;
    report.diagnostics = diagnostics;
    Ok(report)
}

/// The pipeline with a given prior; `tasks` must be `convert`ed `records`.
pub fn rebias_gwas_with_prior(
    records: &[GwasRecord],
    tasks: &[TaskSummary],
    prior: &Prior,
    q: f64,
) -> Result<GwasReport> {
    if records.len() != tasks.len() {
        return Err(Error::LengthMismatch {
            left: records.len(),
            right: tasks.len(),
        });
    }
    let mut p_rebias = Vec::with_capacity(tasks.len());
    for t in tasks {
        let law = conditional_law(prior, t)?;
        p_rebias.push(pvalue_from_law(&law, t.theta_db_hat()));
    }
    let p_direct: Vec<f64> = records.iter().map(GwasRecord::direct_pvalue).collect();
    let p_population: Vec<f64> = tasks
        .iter()
        .map(|t| two_sided_pvalue(t.theta_b_hat / t.sigma))
        .collect();

    let flags = |ps: &[f64]| -> Result<Vec<bool>> {
        let mut f = alloc::vec![false; ps.len()];
        for i in bh_reject(ps, q)? {
            f[i] = true;
        }
        Ok(f)
    };
    let (fr, fd, fp) = (flags(&p_rebias)?, flags(&p_direct)?, flags(&p_population)?);
    let count = |f: &[bool]| f.iter().filter(|&&x| x).count();
    let counts = DiscoveryCounts {
        snps: records.len(),
        rebias: count(&fr),
        direct: count(&fd),
        population: count(&fp),
    };

    let rows = records
        .iter()
        .enumerate()
        .map(|(i, r)| GwasRow {
            snp_id: r.snp_id.clone(),
            p_rebias: p_rebias[i],
            p_direct: p_direct[i],
            p_population: p_population[i],
            rebias_discovered: fr[i],
            direct_discovered: fd[i],
            population_discovered: fp[i],
        })
        .collect();
    Ok(GwasReport {
        rows,
        prior: prior.clone(),
        diagnostics: None,
        counts,
    })
}
