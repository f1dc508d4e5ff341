//! Estimation of the bias distribution from `(b_hat_i, tau_i)` pairs.

mod normal;
mod npmle;

pub use normal::{fit_normal, NormalFit};
pub use npmle::{fit_npmle, FitDiagnostics, NpmleConfig, NpmleFit, PRUNE_WEIGHT, SUPPORT_WEIGHT};

use alloc::vec::Vec;

use crate::model::marginal_density;
use crate::prior::Prior;
use crate::{Error, Result};

pub(crate) fn check_inputs(b_hats: &[f64], taus: &[f64]) -> Result<()> {
    if b_hats.is_empty() {
        return Err(Error::EmptyInput);
    }
    if b_hats.len() != taus.len() {
        return Err(Error::LengthMismatch {
            left: b_hats.len(),
            right: taus.len(),
        });
    }
    if b_hats.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidArgument("bias estimates must be finite"));
    }
    if taus.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidArgument(
            "tau values must be positive and finite",
        ));
    }
    Ok(())
}

/// Average marginal density `(1/n) Σ_i f_G(l; τ_i²)` of `b_hat` implied by
/// `prior`, evaluated at each point of `grid`.
pub fn implied_marginal_curve(
    prior: &Prior,
    taus: &[f64],
    grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if taus.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = taus.len() as f64;
    grid.iter()
        .map(|&l| {
            let mut total = 0.0;
            for &t in taus {
                total += marginal_density(prior, t, l)?;
            }
            Ok((l, total / n))
        })
        .collect()
}
