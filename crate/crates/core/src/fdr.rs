//! Benjamini–Hochberg step-up procedure.

use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Indices rejected by BH at level `q`, in ascending p-value order.
pub fn bh_reject(p_values: &[f64], q: f64) -> Result<Vec<usize>> {
    bh_with_ties(p_values, q, |a, b| a.cmp(&b))
}

fn bh_with_ties(
    p_values: &[f64],
    q: f64,
    tie: impl Fn(usize, usize) -> core::cmp::Ordering,
) -> Result<Vec<usize>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument("FDR level must lie in (0, 1)"));
    }
    if p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidArgument("p-values must lie in [0, 1]"));
    }
    let n = p_values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then_with(|| tie(a, b)));
    let cutoff = order
        .iter()
        .enumerate()
        .rev()
        .find(|&(rank, &i)| p_values[i] <= (rank + 1) as f64 * q / n as f64)
        .map(|(rank, _)| rank + 1)
        .unwrap_or(0);
    order.truncate(cutoff);
    Ok(order)
}

/// Ids rejected by BH at level `q`. Ties in p-value are ordered by id.
pub fn bh_discoveries(p_values: &[(String, f64)], q: f64) -> Result<Vec<String>> {
    let ps: Vec<f64> = p_values.iter().map(|(_, p)| *p).collect();
    let idx = bh_with_ties(&ps, q, |a, b| p_values[a].0.cmp(&p_values[b].0))?;
    Ok(idx.into_iter().map(|i| p_values[i].0.clone()).collect())
}
