use super::check_inputs;
use crate::math::{exp, ln, LN_SQRT_2PI};
use crate::prior::NormalPrior;
use crate::{Error, Result};

/// Lower end of the variance search, relative to the data scale.
const REL_A_FLOOR: f64 = 1e-12;
const LOG_A_TOL: f64 = 1e-10;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Marginal maximum likelihood fit of a normal bias distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalFit {
    pub prior: NormalPrior,
    /// Mean marginal log-likelihood at the optimum.
    pub loglik: f64,
    /// Set when every `b_hat` is identical and `A` is pinned at zero.
    pub degenerate: bool,
}

struct Profile<'a> {
    b: &'a [f64],
    t2: &'a [f64],
}

impl Profile<'_> {
    /// Weighted mean `Σ b_i/(A+τ_i²) / Σ 1/(A+τ_i²)`, exact for fixed `A`.
    fn mu(&self, a: f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (&b, &t2) in self.b.iter().zip(self.t2) {
            let w = 1.0 / (a + t2);
            num += w * b;
            den += w;
        }
        num / den
    }

    fn loglik(&self, a: f64) -> f64 {
        let mu = self.mu(a);
        let s: f64 = self
            .b
            .iter()
            .zip(self.t2)
            .map(|(&b, &t2)| {
                let v = a + t2;
                let d = b - mu;
                LN_SQRT_2PI + 0.5 * ln(v) + 0.5 * d * d / v
            })
            .sum();
        -s / self.b.len() as f64
    }

    /// Derivative of the profile log-likelihood in `A` (envelope theorem).
    fn score(&self, a: f64) -> f64 {
        let mu = self.mu(a);
        self.b
            .iter()
            .zip(self.t2)
            .map(|(&b, &t2)| {
                let v = a + t2;
                let d = b - mu;
                d * d / (v * v) - 1.0 / v
            })
            .sum::<f64>()
    }
}

/// Fits `N(μ, A)` to the bias estimates by maximizing the marginal
/// likelihood `Σ_i log φ(b_hat_i; μ, A + τ_i²)`.
///
/// `μ` is profiled out exactly; `log A` is found by golden-section search and
/// polished by bisection on the sign of the profile score. A maximizer at
/// the lower end of the search range is reported as `A = 0`.
pub fn fit_normal(b_hats: &[f64], taus: &[f64]) -> Result<NormalFit> {
    check_inputs(b_hats, taus)?;
    let n = b_hats.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let t2: alloc::vec::Vec<f64> = taus.iter().map(|t| t * t).collect();
    let profile = Profile { b: b_hats, t2: &t2 };

    let mean = b_hats.iter().sum::<f64>() / n as f64;
    let var = b_hats.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / n as f64;
    let finish = |a: f64, degenerate: bool| -> Result<NormalFit> {
        let prior = NormalPrior::new(profile.mu(a), a)?;
        Ok(NormalFit {
            prior,
            loglik: profile.loglik(a),
            degenerate,
        })
    };
    if var == 0.0 {
        let prior = NormalPrior::new(b_hats[0], 0.0)?;
        return Ok(NormalFit {
            prior,
            loglik: profile.loglik(0.0),
            degenerate: true,
        });
    }

    let mean_t2 = t2.iter().sum::<f64>() / n as f64;
    let t_lo = ln(REL_A_FLOOR * var.max(mean_t2));
    let t_hi = ln(10.0 * var);
    if t_hi <= t_lo {
        return finish(0.0, false);
    }

    // golden-section search on log A
    let f = |t: f64| profile.loglik(exp(t));
    let (mut lo, mut hi) = (t_lo, t_hi);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-6 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let mut t = 0.5 * (lo + hi);

    // polish on the score sign change, widening the bracket if needed
    let score = |t: f64| profile.score(exp(t));
    let mut h = 1e-5;
    let mut bracket = None;
    for _ in 0..40 {
        let (a, b) = ((t - h).max(t_lo), (t + h).min(t_hi));
        if score(a) > 0.0 && score(b) < 0.0 {
            bracket = Some((a, b));
            break;
        }
        if a == t_lo && b == t_hi {
            break;
        }
        h *= 2.0;
    }
    if let Some((mut a, mut b)) = bracket {
        while b - a > LOG_A_TOL {
            let m = 0.5 * (a + b);
            if score(m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        t = 0.5 * (a + b);
    }

    let a_hat = exp(t);
    if t - t_lo < 1e-4 || profile.loglik(0.0) >= profile.loglik(a_hat) {
        return finish(0.0, false);
    }
    finish(a_hat, false)
}
