//! Grid-restricted nonparametric maximum likelihood for the bias
//! distribution.
//!
//! The marginal log-likelihood `(1/n) Σ_i log Σ_k w_k φ(b_hat_i − g_k; τ_i²)`
//! is concave in the grid weights `w`. We maximize it with projected Newton
//! steps (sequential quadratic programming over the nonnegative orthant);
//! every accepted step raises the log-likelihood, so the trace is monotone.
//!
//! Optimality is certified by the gradient
//! `D(g_k) = (1/n) Σ_i φ(b_hat_i − g_k; τ_i²) / f(b_hat_i) − 1`, which must be
//! at most `tol_kkt` on the whole grid and within `tol_kkt` of zero on the
//! support of the returned prior.

use alloc::vec;
use alloc::vec::Vec;

use super::check_inputs;
use crate::math::{exp, ln, ln_normal_pdf};
use crate::prior::DiscretePrior;
use crate::{Error, Result};

/// Atoms lighter than this are dropped from the fitted prior.
pub const PRUNE_WEIGHT: f64 = 1e-10;
/// Atoms at least this heavy count as support in the KKT certificate.
pub const SUPPORT_WEIGHT: f64 = PRUNE_WEIGHT;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct NpmleConfig {
    pub grid_size: usize,
    /// Lower grid endpoint; defaults to `min b_hat`.
    pub grid_lo: Option<f64>,
    /// Upper grid endpoint; defaults to `max b_hat`.
    pub grid_hi: Option<f64>,
    pub max_iters: usize,
    /// Relative change in log-likelihood below which iteration may stop.
    pub tol_loglik: f64,
    pub tol_kkt: f64,
}

impl Default for NpmleConfig {
    fn default() -> Self {
        Self {
            grid_size: 50,
            grid_lo: None,
            grid_hi: None,
            max_iters: 10_000,
            tol_loglik: 1e-9,
            tol_kkt: 1e-4,
        }
    }
}

impl NpmleConfig {
    /// Denser grid used for genome-wide summary statistics.
    pub fn gwas() -> Self {
        Self {
            grid_size: 300,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 2 {
            return Err(Error::InvalidArgument("grid_size must be at least 2"));
        }
        if let (Some(lo), Some(hi)) = (self.grid_lo, self.grid_hi) {
            if !(lo < hi) {
                return Err(Error::InvalidArgument("grid_lo must be below grid_hi"));
            }
        }
        if self.grid_lo.is_some_and(|x| !x.is_finite())
            || self.grid_hi.is_some_and(|x| !x.is_finite())
        {
            return Err(Error::InvalidArgument("grid endpoints must be finite"));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive"));
        }
        if !(self.tol_loglik > 0.0 && self.tol_kkt > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive"));
        }
        Ok(())
    }

    fn grid(&self, b_hats: &[f64]) -> Result<Vec<f64>> {
        let min = b_hats.iter().copied().fold(f64::INFINITY, f64::min);
        let max = b_hats.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = self.grid_lo.unwrap_or(min);
        let hi = self.grid_hi.unwrap_or(max);
        if lo > hi {
            return Err(Error::InvalidArgument("grid endpoints are inverted"));
        }
        if lo == hi {
            return Ok(vec![lo]);
        }
        let step = (hi - lo) / (self.grid_size - 1) as f64;
        let mut grid: Vec<f64> = (0..self.grid_size).map(|k| lo + step * k as f64).collect();
        *grid.last_mut().unwrap() = hi;
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitDiagnostics {
    pub final_loglik: f64,
    pub iterations: usize,
    pub kkt_sup: f64,
    pub converged: bool,
    /// Mean log-likelihood after each accepted update, starting from the
    /// uniform initialization.
    #[cfg_attr(feature = "serde", serde(skip))]
    pub loglik_trace: Vec<f64>,
}

impl FitDiagnostics {
    /// Smallest change between consecutive entries of the trace.
    pub fn min_increment(&self) -> f64 {
        self.loglik_trace
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpmleFit {
    pub prior: DiscretePrior,
    pub diagnostics: FitDiagnostics,
}

impl NpmleFit {
    /// Turns an unconverged fit into [`Error::NotConverged`].
    pub fn require_converged(self) -> Result<Self> {
        if self.diagnostics.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.diagnostics.iterations,
                kkt_sup: self.diagnostics.kkt_sup,
            })
        }
    }
}

/// Row-scaled likelihood matrix `L_ik = φ(b_hat_i − g_k; τ_i²) / max_k φ(·)`.
struct Problem {
    rows: usize,
    cols: usize,
    lik: Vec<f64>,
    offset: f64,
}

impl Problem {
    fn new(b_hats: &[f64], taus: &[f64], grid: &[f64]) -> Self {
        let (rows, cols) = (b_hats.len(), grid.len());
        let mut lik = vec![0.0; rows * cols];
        let mut offset = 0.0;
        for (i, (&b, &t)) in b_hats.iter().zip(taus).enumerate() {
            let row = &mut lik[i * cols..(i + 1) * cols];
            let var = t * t;
            let mut max = f64::NEG_INFINITY;
            for (x, &g) in row.iter_mut().zip(grid) {
                *x = ln_normal_pdf(b - g, var);
                max = max.max(*x);
            }
            row.iter_mut().for_each(|x| *x = exp(*x - max));
            offset += max;
        }
        Self {
            rows,
            cols,
            lik,
            offset: offset / rows as f64,
        }
    }

    /// Mean log-likelihood at `w`; writes `(1/n) Σ_i L_ik / f_i` into `ratio`.
    fn evaluate(&self, w: &[f64], ratio: &mut [f64]) -> f64 {
        ratio.iter_mut().for_each(|r| *r = 0.0);
        let mut ll = 0.0;
        for row in self.lik.chunks_exact(self.cols) {
            let f: f64 = row.iter().zip(w).map(|(l, w)| l * w).sum();
            ll += ln(f);
            let inv = 1.0 / f;
            for (r, l) in ratio.iter_mut().zip(row) {
                *r += l * inv;
            }
        }
        let n = self.rows as f64;
        ratio.iter_mut().for_each(|r| *r /= n);
        ll / n + self.offset
    }
}

fn kkt_sup(w: &[f64], ratio: &[f64]) -> f64 {
    w.iter()
        .zip(ratio)
        .fold(f64::NEG_INFINITY, |acc, (&w, &r)| {
            let d = r - 1.0;
            acc.max(if w >= SUPPORT_WEIGHT { d.abs() } else { d })
        })
}

const ARMIJO: f64 = 1e-2;
const MIN_STEP: f64 = 1e-12;
const QP_TOL: f64 = 1e-12;

/// Dense symmetric positive definite solve by Cholesky, in place. Returns
/// `false` if a pivot is not positive.
fn cholesky_solve(a: &mut [f64], n: usize, rhs: &mut [f64]) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for p in 0..j {
            d -= a[j * n + p] * a[j * n + p];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = libm::sqrt(d);
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for p in 0..j {
                s -= a[i * n + p] * a[j * n + p];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = rhs[i];
        for p in 0..i {
            s -= a[i * n + p] * rhs[p];
        }
        rhs[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for p in i + 1..n {
            s -= a[p * n + i] * rhs[p];
        }
        rhs[i] = s / a[i * n + i];
    }
    true
}

impl Problem {
    fn mixture(&self, w: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.lik.chunks_exact(self.cols)) {
            *o = row.iter().zip(w).map(|(l, w)| l * w).sum();
        }
    }

    /// `H y` for `y` supported on `set`, where
    /// `H = (1/n) Σ_i L_i L_iᵀ / f_i²` is the Hessian of `−ℓ`.
    fn hess_times(&self, set: &[usize], y: &[f64], inv_f2: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (row, s) in self.lik.chunks_exact(self.cols).zip(inv_f2) {
            let ly: f64 = set.iter().map(|&j| row[j] * y[j]).sum();
            let c = ly * s;
            if c != 0.0 {
                for (o, l) in out.iter_mut().zip(row) {
                    *o += l * c;
                }
            }
        }
        let n = self.rows as f64;
        out.iter_mut().for_each(|o| *o /= n);
    }

    fn hess_block(&self, set: &[usize], inv_f2: &[f64], out: &mut Vec<f64>) {
        let m = set.len();
        out.clear();
        out.resize(m * m, 0.0);
        for (row, s) in self.lik.chunks_exact(self.cols).zip(inv_f2) {
            for a in 0..m {
                let la = row[set[a]] * s;
                if la == 0.0 {
                    continue;
                }
                for b in 0..=a {
                    out[a * m + b] += la * row[set[b]];
                }
            }
        }
        let n = self.rows as f64;
        let mut max_diag: f64 = 0.0;
        for a in 0..m {
            for b in 0..=a {
                out[a * m + b] /= n;
                out[b * m + a] = out[a * m + b];
            }
            max_diag = max_diag.max(out[a * m + a]);
        }
        let ridge = 1e-10 * max_diag.max(1e-300);
        for a in 0..m {
            out[a * m + a] += ridge;
        }
    }
}

/// Minimizes the quadratic model `½ yᵀHy + bᵀy` over `y ≥ 0` by a primal
/// active-set method started at `y = 0`. `b = 1 − 2·ratio`.
fn solve_qp(problem: &Problem, ratio: &[f64], inv_f2: &[f64], y: &mut [f64]) {
    let k = problem.cols;
    let b: Vec<f64> = ratio.iter().map(|r| 1.0 - 2.0 * r).collect();
    y.iter_mut().for_each(|v| *v = 0.0);
    let mut set: Vec<usize> = Vec::new();
    let mut grad = b.clone();
    let mut hy = vec![0.0; k];
    let mut block = Vec::new();
    let mut z = Vec::new();
    'outer: for _ in 0..(4 * k + 20) {
        // most negative gradient among inactive variables
        let candidate = (0..k)
            .filter(|j| !set.contains(j))
            .min_by(|&a, &c| grad[a].total_cmp(&grad[c]))
            .filter(|&j| grad[j] < -QP_TOL);
        let Some(j) = candidate else { break };
        set.push(j);
        loop {
            problem.hess_block(&set, inv_f2, &mut block);
            z.clear();
            z.extend(set.iter().map(|&j| -b[j]));
            if !cholesky_solve(&mut block, set.len(), &mut z) {
                // keep the last solution; its working set is still feasible
                break 'outer;
            }
            if z.iter().all(|&v| v > 0.0) {
                for (&j, &v) in set.iter().zip(&z) {
                    y[j] = v;
                }
                break;
            }
            // move toward z until the first variable hits zero, then drop it
            let mut t = 1.0;
            for (&j, &v) in set.iter().zip(&z) {
                if v <= 0.0 {
                    t = f64::min(t, y[j] / (y[j] - v));
                }
            }
            for (&j, &v) in set.iter().zip(&z) {
                y[j] += t * (v - y[j]);
            }
            set.retain(|&j| y[j] > QP_TOL * 1e-3);
            for (j, yj) in y.iter_mut().enumerate() {
                if !set.contains(&j) {
                    *yj = 0.0;
                }
            }
            if set.is_empty() {
                break;
            }
        }
        problem.hess_times(&set, y, inv_f2, &mut hy);
        for j in 0..k {
            grad[j] = hy[j] + b[j];
        }
    }
    for (j, yj) in y.iter_mut().enumerate() {
        if !set.contains(&j) {
            *yj = 0.0;
        }
    }
}

/// Fits the grid-restricted NPMLE of the bias distribution.
///
/// Each iteration minimizes a second-order model of
/// `−ℓ(w) + Σ_k w_k` over the nonnegative orthant with an active-set QP,
/// takes an Armijo step toward the QP solution and renormalizes onto the
/// simplex, which can only raise `ℓ`. Off-support weights become exact
/// zeros, so the certificate is reached in a few dozen iterations.
///
/// Returns the fit even when the iteration budget runs out before the KKT
/// certificate holds; `diagnostics.converged` is then `false` and
/// [`NpmleFit::require_converged`] converts it into an error.
pub fn fit_npmle(b_hats: &[f64], taus: &[f64], cfg: &NpmleConfig) -> Result<NpmleFit> {
    check_inputs(b_hats, taus)?;
    cfg.validate()?;
    let grid = cfg.grid(b_hats)?;
    let problem = Problem::new(b_hats, taus, &grid);
    let k = grid.len();
    let n = problem.rows;

    let mut w = vec![1.0 / k as f64; k];
    let mut ratio = vec![0.0; k];
    let mut ll = problem.evaluate(&w, &mut ratio);
    let mut trace = vec![ll];

    let mut f = vec![0.0; n];
    let mut inv_f2 = vec![0.0; n];
    let mut y = vec![0.0; k];
    let mut trial = vec![0.0; k];
    let mut trial_ratio = vec![0.0; k];

    let mut iterations = 0;
    let mut kkt = kkt_sup(&w, &ratio);
    let mut converged = false;

    while !converged && iterations < cfg.max_iters {
        iterations += 1;
        problem.mixture(&w, &mut f);
        for (s, &fi) in inv_f2.iter_mut().zip(&f) {
            *s = 1.0 / (fi * fi);
        }
        solve_qp(&problem, &ratio, &inv_f2, &mut y);

        // objective −ℓ(x) + Σx restricted to the segment w + a(y − w)
        let slope: f64 = (0..k).map(|j| (1.0 - ratio[j]) * (y[j] - w[j])).sum();
        let mut best = None;
        if slope < 0.0 {
            let base = 1.0 - ll;
            let mut a = 1.0;
            while a >= MIN_STEP {
                let mut total = 0.0;
                for j in 0..k {
                    trial[j] = w[j] + a * (y[j] - w[j]);
                    total += trial[j];
                }
                let phi = -problem.evaluate(&trial, &mut trial_ratio) + total;
                if phi.is_finite() && phi <= base + ARMIJO * a * slope {
                    break;
                }
                a *= 0.5;
            }
            if a >= MIN_STEP {
                let total: f64 = trial.iter().sum();
                trial.iter_mut().for_each(|x| *x /= total);
                let new_ll = problem.evaluate(&trial, &mut trial_ratio);
                if new_ll >= ll {
                    best = Some(new_ll);
                }
            }
        }
        let rel_change = match best {
            Some(new_ll) => {
                let change = (new_ll - ll) / ll.abs().max(1.0);
                w.copy_from_slice(&trial);
                ratio.copy_from_slice(&trial_ratio);
                ll = new_ll;
                change
            }
            None => 0.0,
        };
        trace.push(ll);
        kkt = kkt_sup(&w, &ratio);
        converged = kkt <= cfg.tol_kkt && rel_change < cfg.tol_loglik;
        if best.is_none() && !converged {
            // no further progress is possible at working precision
            break;
        }
    }

    let kept: Vec<(f64, f64)> = grid
        .iter()
        .copied()
        .zip(w.iter().copied())
        .filter(|&(_, w)| w >= PRUNE_WEIGHT)
        .collect();
    let (atoms, weights): (Vec<f64>, Vec<f64>) = kept.into_iter().unzip();
    let prior = DiscretePrior::from_unnormalized(atoms, weights)?;
    Ok(NpmleFit {
        prior,
        diagnostics: FitDiagnostics {
            final_loglik: ll,
            iterations,
            kkt_sup: kkt,
            converged,
            loglik_trace: trace,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_observations_give_point_mass() {
        let b = [3.0; 25];
        let t = [1.0; 25];
        let cfg = NpmleConfig {
            grid_lo: Some(0.0),
            grid_hi: Some(6.0),
            grid_size: 61,
            ..Default::default()
        };
        let fit = fit_npmle(&b, &t, &cfg)
            .unwrap()
            .require_converged()
            .unwrap();
        let mass_at_3: f64 = fit
            .prior
            .iter()
            .filter(|(a, _)| (a - 3.0).abs() < 1e-9)
            .map(|(_, w)| w)
            .sum();
        assert!((mass_at_3 - 1.0).abs() < 1e-6, "{:?}", fit.prior);

        // default grid collapses to the single data value
        let fit = fit_npmle(&b, &t, &NpmleConfig::default()).unwrap();
        assert_eq!(fit.prior.atoms(), &[3.0]);
        assert!(fit.diagnostics.converged);
    }

    #[test]
    fn single_observation() {
        let fit = fit_npmle(&[0.7], &[0.4], &NpmleConfig::default()).unwrap();
        assert_eq!(fit.prior.atoms(), &[0.7]);
        assert_eq!(fit.prior.weights(), &[1.0]);
    }

    #[test]
    fn grid_endpoints() {
        let cfg = NpmleConfig {
            grid_size: 5,
            ..Default::default()
        };
        assert_eq!(
            cfg.grid(&[2.0, -2.0, 0.5]).unwrap(),
            vec![-2.0, -1.0, 0.0, 1.0, 2.0]
        );
        let bad = NpmleConfig {
            grid_lo: Some(1.0),
            grid_hi: Some(0.0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = NpmleConfig {
            grid_size: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn errors() {
        assert_eq!(
            fit_npmle(&[], &[], &NpmleConfig::default()).unwrap_err(),
            Error::EmptyInput
        );
        let cfg = NpmleConfig {
            max_iters: 1,
            ..Default::default()
        };
        let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let fit = fit_npmle(&b, &[1.0; 40], &cfg).unwrap();
        assert!(!fit.diagnostics.converged);
        assert!(matches!(
            fit.require_converged(),
            Err(Error::NotConverged { .. })
        ));
    }

    #[test]
    fn loglik_trace_is_monotone_and_certificate_holds() {
        let b: Vec<f64> = (0..300)
            .map(|i| if i % 3 == 0 { -2.0 } else { 1.5 } + ((i * 7919) % 101) as f64 / 50.0 - 1.0)
            .collect();
        let t: Vec<f64> = (0..300).map(|i| 0.5 + (i % 7) as f64 * 0.2).collect();
        let fit = fit_npmle(&b, &t, &NpmleConfig::default())
            .unwrap()
            .require_converged()
            .unwrap();
        assert!(fit.diagnostics.min_increment() >= 0.0);
        assert!(fit.diagnostics.kkt_sup <= 1e-4);
        let total: f64 = fit.prior.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
