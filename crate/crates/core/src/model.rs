//! Oracle and plug-in rebiasing for a fixed prior: posterior weights and
//! means, rebiased point estimates, conditional laws, intervals and p-values.

use alloc::string::String;
use alloc::vec::Vec;

use crate::law::ConditionalLaw;
use crate::math::{ln_normal_pdf, normal_pdf, softmax_in_place, sqrt, z_two_sided};
use crate::prior::{DiscretePrior, NormalPrior, Prior};
use crate::task::TaskSummary;
use crate::{Error, Result};

/// Interval constructions compared throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    /// Wald interval from the labeled data alone.
    Classical,
    /// Wald interval around the biased estimate, ignoring the bias.
    PredMean,
    /// Wald interval around the debiased estimate.
    Debiased,
    /// Rebiased interval under a fitted normal prior.
    RbNormal,
    /// Rebiased interval under a fitted NPMLE prior.
    RbNpmle,
    /// Rebiased interval under the true prior.
    Oracle,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Classical,
        Method::PredMean,
        Method::Debiased,
        Method::RbNormal,
        Method::RbNpmle,
        Method::Oracle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Classical => "classical",
            Method::PredMean => "pred_mean",
            Method::Debiased => "debiased",
            Method::RbNormal => "rb_normal",
            Method::RbNpmle => "rb_npmle",
            Method::Oracle => "oracle",
        }
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or(Error::InvalidArgument("unknown method"))
    }
}

/// A per-task interval with its point estimate and optional p-value.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntervalReport {
    pub id: String,
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub alpha: f64,
    pub p_value: Option<f64>,
    pub method: Method,
}

impl IntervalReport {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Closed-interval membership.
    pub fn contains(&self, theta: f64) -> bool {
        self.lo <= theta && theta <= self.hi
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_p_value(mut self, p: f64) -> Self {
        self.p_value = Some(p);
        self
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument("alpha must lie in (0, 1)"))
    }
}

/// Posterior probabilities of the prior's atoms given `b_hat`, computed in
/// log space.
pub fn posterior_weights(prior: &DiscretePrior, task: &TaskSummary) -> Result<Vec<f64>> {
    task.validate()?;
    let var = task.tau * task.tau;
    let mut logw: Vec<f64> = prior
        .iter()
        .map(|(b, w)| libm::log(w) + ln_normal_pdf(task.b_hat - b, var))
        .collect();
    softmax_in_place(&mut logw);
    Ok(logw)
}

fn normal_shrinkage(prior: &NormalPrior, tau: f64) -> f64 {
    // A/(A + τ²); exactly zero for a point mass
    prior.a / (prior.a + tau * tau)
}

/// Posterior mean of the bias given `b_hat`.
pub fn posterior_mean(prior: &Prior, task: &TaskSummary) -> Result<f64> {
    task.validate()?;
    match prior {
        Prior::Normal(p) => Ok(p.mu + normal_shrinkage(p, task.tau) * (task.b_hat - p.mu)),
        Prior::Discrete(p) => {
            let w = posterior_weights(p, task)?;
            Ok(p.atoms().iter().zip(&w).map(|(b, w)| b * w).sum())
        }
    }
}

/// Rebiased point estimate `theta_db_hat − c·(b_hat − E[b | b_hat])`.
pub fn rebias_point(prior: &Prior, task: &TaskSummary) -> Result<f64> {
    let m = posterior_mean(prior, task)?;
    Ok(task.theta_db_hat() - task.slope() * (task.b_hat - m))
}

/// Conditional law of `theta_db_hat − θ` given `b_hat` under `prior`.
pub fn conditional_law(prior: &Prior, task: &TaskSummary) -> Result<ConditionalLaw> {
    task.validate()?;
    let c = task.slope();
    match prior {
        Prior::Normal(p) => {
            let tau2 = task.tau * task.tau;
            let post_var = p.a * tau2 / (p.a + tau2);
            let center = c * (tau2 / (p.a + tau2)) * (task.b_hat - p.mu);
            let resid = task.residual_sd();
            let spread = sqrt(resid * resid + c * c * post_var);
            ConditionalLaw::gaussian(center, spread)
        }
        Prior::Discrete(p) => {
            let weights = posterior_weights(p, task)?;
            let centers = p.atoms().iter().map(|b| c * (task.b_hat - b)).collect();
            ConditionalLaw::new(centers, weights, task.residual_sd())
        }
    }
}

fn default_method(prior: &Prior) -> Method {
    match prior {
        Prior::Normal(_) => Method::RbNormal,
        Prior::Discrete(_) => Method::RbNpmle,
    }
}

/// Equal-tailed rebiased `(1 − alpha)` interval.
pub fn rebias_interval(prior: &Prior, task: &TaskSummary, alpha: f64) -> Result<IntervalReport> {
    check_alpha(alpha)?;
    let law = conditional_law(prior, task)?;
    let db = task.theta_db_hat();
    let q_hi = law.quantile(1.0 - 0.5 * alpha)?;
    let q_lo = law.quantile(0.5 * alpha)?;
    Ok(IntervalReport {
        id: task.id.clone(),
        point: rebias_point(prior, task)?,
        lo: db - q_hi,
        hi: db - q_lo,
        alpha,
        p_value: None,
        method: default_method(prior),
    })
}

/// Rebiased p-value for `H0: θ = theta0`.
pub fn rebias_pvalue(prior: &Prior, task: &TaskSummary, theta0: f64) -> Result<f64> {
    let law = conditional_law(prior, task)?;
    Ok(pvalue_from_law(&law, task.theta_db_hat() - theta0))
}

pub(crate) fn pvalue_from_law(law: &ConditionalLaw, z: f64) -> f64 {
    let lower = law.cdf(z);
    let upper = law.sf(z);
    (2.0 * lower.min(upper)).clamp(0.0, 1.0)
}

/// Marginal density of `b_hat` at `l` for noise SD `tau`.
pub fn marginal_density(prior: &Prior, tau: f64, l: f64) -> Result<f64> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidArgument("tau must be positive"));
    }
    let var = tau * tau;
    Ok(match prior {
        Prior::Normal(p) => normal_pdf(l - p.mu, p.a + var),
        Prior::Discrete(p) => p.iter().map(|(b, w)| w * normal_pdf(l - b, var)).sum(),
    })
}

fn wald(
    task: &TaskSummary,
    center: f64,
    sd: f64,
    alpha: f64,
    method: Method,
) -> Result<IntervalReport> {
    check_alpha(alpha)?;
    task.validate()?;
    let half = z_two_sided(alpha) * sd;
    Ok(IntervalReport {
        id: task.id.clone(),
        point: center,
        lo: center - half,
        hi: center + half,
        alpha,
        p_value: None,
        method,
    })
}

/// Wald interval around the debiased estimate with SD `sigma_tilde`.
pub fn debiased_interval(task: &TaskSummary, alpha: f64) -> Result<IntervalReport> {
    wald(
        task,
        task.theta_db_hat(),
        task.sigma_tilde(),
        alpha,
        Method::Debiased,
    )
}

/// Wald interval around the biased estimate with SD `sigma`, ignoring bias.
pub fn biased_interval(task: &TaskSummary, alpha: f64) -> Result<IntervalReport> {
    wald(task, task.theta_b_hat, task.sigma, alpha, Method::PredMean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const Z975: f64 = 1.959_963_984_540_054;

    fn task(theta_b: f64, b_hat: f64, sigma: f64, tau: f64, rho: f64) -> TaskSummary {
        TaskSummary::new("t", theta_b, b_hat, sigma, tau, rho).unwrap()
    }

    fn two_point() -> DiscretePrior {
        DiscretePrior::new(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn posterior_weights_examples() {
        let w = posterior_weights(&two_point(), &task(0.0, 0.0, 1.0, 1.0, 0.0)).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);

        let point = DiscretePrior::point_mass(2.0).unwrap();
        let w = posterior_weights(&point, &task(0.0, -7.0, 1.0, 0.3, 0.0)).unwrap();
        assert_eq!(w, vec![1.0]);

        // φ(2) / (φ(2) + φ(0)) = 1 / (1 + e²)
        let w = posterior_weights(&two_point(), &task(0.0, 1.0, 1.0, 1.0, 0.0)).unwrap();
        assert!((w[0] - 0.119_202_922_022_117_6).abs() < 1e-12);
        assert!((w[1] - 0.880_797_077_977_882_4).abs() < 1e-12);
    }

    #[test]
    fn posterior_weights_survive_tiny_tau() {
        // raw densities underflow to zero here
        let w = posterior_weights(&two_point(), &task(0.0, 0.3, 1.0, 1e-3, 0.0)).unwrap();
        assert!((w[1] - 1.0).abs() < 1e-15);
        assert!(w.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn posterior_mean_examples() {
        let n = Prior::normal(0.0, 1.0).unwrap();
        assert!((posterior_mean(&n, &task(0.0, 2.0, 1.0, 1.0, 0.0)).unwrap() - 1.0).abs() < 1e-15);
        let d = Prior::normal(0.3, 0.0).unwrap();
        assert_eq!(
            posterior_mean(&d, &task(0.0, -4.0, 1.0, 2.0, 0.0)).unwrap(),
            0.3
        );
        let m = posterior_mean(&two_point().into(), &task(0.0, 1.0, 1.0, 1.0, 0.0)).unwrap();
        // 2 · 0.8808 − 1 = tanh(1)
        assert!((m - 0.761_594_155_955_764_9).abs() < 1e-12);
    }

    #[test]
    fn rebias_point_examples() {
        let t = task(1.7, 0.4, 1.0, 1.0, 0.0);
        let delta0 = Prior::point_mass(0.0).unwrap();
        assert!((rebias_point(&delta0, &t).unwrap() - 1.7).abs() < 1e-15);

        let wide = Prior::normal(0.0, 1e12).unwrap();
        assert!((rebias_point(&wide, &t).unwrap() - t.theta_db_hat()).abs() < 1e-9);

        // theta_db = 0, b_hat = 2: 0 + τ²/(A + τ²) · 2 = 1
        let t = task(2.0, 2.0, 1.0, 1.0, 0.0);
        let n = Prior::normal(0.0, 1.0).unwrap();
        assert!((rebias_point(&n, &t).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn conditional_law_point_mass() {
        let p = Prior::point_mass(2.0).unwrap();
        let law = conditional_law(&p, &task(0.0, 0.0, 1.0, 1.0, 0.0)).unwrap();
        assert!((law.cdf(2.0) - 0.5).abs() < 1e-15);
        // CDF(z) = Φ((z − (b0 − b_hat))/σ)
        let t = task(0.0, 0.6, 1.5, 0.7, 0.0);
        let law = conditional_law(&Prior::point_mass(-0.4).unwrap(), &t).unwrap();
        let z = 0.3;
        let expect = crate::math::std_normal_cdf((z - (-0.4 - 0.6)) / 1.5);
        assert!((law.cdf(z) - expect).abs() < 1e-15);
    }

    #[test]
    fn normal_law_matches_closed_form_moments() {
        let (s, t, r, a, mu, bh) = (0.8, 1.3, 0.4, 0.5, 0.2, -0.9);
        let tk = task(1.0, bh, s, t, r);
        let law = conditional_law(&Prior::normal(mu, a).unwrap(), &tk).unwrap();
        let k = r * s * t - t * t;
        let mean = k / (t * t + a) * (bh - mu);
        let var = s * s + t * t - 2.0 * r * s * t - k * k / (t * t + a);
        assert!((law.mean() - mean).abs() < 1e-14);
        assert!((law.spread() * law.spread() - var).abs() < 1e-14);
    }

    #[test]
    fn interval_examples() {
        let t = task(0.37, -0.2, 1.0, 0.6, 0.0);
        let iv = rebias_interval(&Prior::normal(0.0, 0.0).unwrap(), &t, 0.05).unwrap();
        assert!((iv.lo - (0.37 - Z975)).abs() < 1e-9);
        assert!((iv.hi - (0.37 + Z975)).abs() < 1e-9);

        let t = task(0.0, 0.0, 1.0, 1.0, 0.0);
        let iv = rebias_interval(&Prior::normal(0.0, 3.0).unwrap(), &t, 0.05).unwrap();
        let half = Z975 * 1.75f64.sqrt();
        assert!((iv.hi - half).abs() < 1e-9 && (iv.lo + half).abs() < 1e-9);
        assert!((half - 2.5928).abs() < 1e-3);
    }

    #[test]
    fn discrete_interval_round_trips_through_cdf() {
        let prior: Prior = DiscretePrior::new(vec![-1.0, 0.2, 3.0], vec![0.3, 0.5, 0.2])
            .unwrap()
            .into();
        let t = task(1.1, 0.9, 0.8, 1.2, 0.3);
        let law = conditional_law(&prior, &t).unwrap();
        for &alpha in &[0.01, 0.05, 0.2] {
            let iv = rebias_interval(&prior, &t, alpha).unwrap();
            let db = t.theta_db_hat();
            assert!((law.cdf(db - iv.lo) - (1.0 - alpha / 2.0)).abs() < 1e-8);
            assert!((law.cdf(db - iv.hi) - alpha / 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn normal_interval_matches_closed_form_general_rho() {
        let (s, t, r, a, mu) = (0.7, 1.1, -0.35, 0.4, 0.1);
        let tk = task(2.0, 0.5, s, t, r);
        let iv = rebias_interval(&Prior::normal(mu, a).unwrap(), &tk, 0.1).unwrap();
        let k = r * s * t - t * t;
        let point = tk.theta_db_hat() - k / (t * t + a) * (0.5 - mu);
        let half = crate::math::z_two_sided(0.1)
            * (s * s + t * t - 2.0 * r * s * t - k * k / (t * t + a)).sqrt();
        assert!((iv.point - point).abs() < 1e-12);
        assert!((iv.lo - (point - half)).abs() < 1e-8);
        assert!((iv.hi - (point + half)).abs() < 1e-8);
    }

    #[test]
    fn pvalue_examples() {
        let delta0 = Prior::point_mass(0.0).unwrap();
        let t = task(0.5, 0.0, 1.0, 1.0, 0.0);
        assert_eq!(rebias_pvalue(&delta0, &t, 0.5).unwrap(), 1.0);
        let t = task(1.959_964, 0.0, 1.0, 1.0, 0.0);
        assert!((rebias_pvalue(&delta0, &t, 0.0).unwrap() - 0.05).abs() < 1e-6);
    }

    #[test]
    fn normal_pvalue_matches_closed_form() {
        let (s, t, a, mu, theta0) = (0.9, 0.5, 0.3, -0.2, 0.4);
        let tk = task(1.4, 0.8, s, t, 0.0);
        let p = rebias_pvalue(&Prior::normal(mu, a).unwrap(), &tk, theta0).unwrap();
        let shrink = t * t / (a + t * t);
        let num = (tk.theta_db_hat() + shrink * (0.8 - mu) - theta0).abs();
        let den = (s * s + a * t * t / (a + t * t)).sqrt();
        let expect = 2.0 * crate::math::std_normal_cdf(-num / den);
        assert!((p - expect).abs() < 1e-10);
    }

    #[test]
    fn marginal_density_examples() {
        let delta0 = Prior::point_mass(0.0).unwrap();
        assert!((marginal_density(&delta0, 1.0, 0.0).unwrap() - 0.398_942_3).abs() < 1e-7);
        let n = Prior::normal(0.0, 3.0).unwrap();
        assert!((marginal_density(&n, 1.0, 0.0).unwrap() - 0.199_471_1).abs() < 1e-7);
        let sym: Prior = two_point().into();
        let (x, y) = (
            marginal_density(&sym, 0.7, 1.3).unwrap(),
            marginal_density(&sym, 0.7, -1.3).unwrap(),
        );
        assert!((x - y).abs() < 1e-16);
    }

    #[test]
    fn baseline_wald_intervals() {
        let t = task(2.0, 0.5, 1.0, 1.0, 0.0);
        let b = biased_interval(&t, 0.05).unwrap();
        assert!((b.width() - 2.0 * Z975).abs() < 1e-12);
        let d = debiased_interval(&t, 0.05).unwrap();
        assert!((d.point - 1.5).abs() < 1e-15);
        assert!((d.width() - 2.0 * Z975 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_alpha() {
        let t = task(0.0, 0.0, 1.0, 1.0, 0.0);
        let p = Prior::normal(0.0, 1.0).unwrap();
        assert!(rebias_interval(&p, &t, 0.0).is_err());
        assert!(rebias_interval(&p, &t, 1.0).is_err());
    }
}
